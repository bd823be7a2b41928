#include "diffdepth/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "diffdepth/checkpoint.hpp"
#include "diffdepth/fsio.hpp"

namespace diffdepth {

Trainer::Trainer(RunConfig cfg, const std::vector<Sample>& data) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (data.empty()) throw ValueError("Trainer: empty dataset");
    sched_ = cfg_.schedule();
    model_ = init_unet_params<float>(cfg_.unet(), cfg_.seed);
    model_.store.add("biasmap.tau", Tensor<float>::zeros({1}));
    opt_.lr = cfg_.lr;
    opt_.beta1 = cfg_.adam_beta1;
    opt_.beta2 = cfg_.adam_beta2;
    opt_.weight_decay = cfg_.weight_decay;
    opt_.attach(model_.store, /*no_decay=*/{"biasmap.tau"});

    PrepOptions prep;
    prep.latent_factor = cfg_.latent_factor;
    prep.w_dist_on = cfg_.w_dist_on;
    prep.w_struct_on = cfg_.w_struct_on;
    prep.dist_pool = cfg_.dist_pool();
    prep.struct_pool = cfg_.struct_pool();
    prepared_.reserve(data.size());
    for (const auto& s : data) prepared_.push_back(prepare_sample<float>(s, prep));
}

TrainLogRow Trainer::step() {
    auto t0 = std::chrono::steady_clock::now();
    Rng step_rng = Rng(cfg_.seed).stream("step", (uint64_t)step_count_);
    Rng data_rng = step_rng.stream("data");

    std::vector<const PreparedSample<float>*> batch;
    batch.reserve((size_t)cfg_.batch_size);
    for (int64_t i = 0; i < cfg_.batch_size; ++i)
        batch.push_back(&prepared_[(size_t)data_rng.uniform_int(0, (int64_t)prepared_.size() - 1)]);

    StepSettings st;
    st.gamma = cfg_.gamma;
    st.lambda_var = cfg_.lambda_var;
    st.biasmap_on = cfg_.biasmap_on;
    st.var_loss_on = cfg_.var_loss_on;

    model_.store.zero_grads();
    StepGraph<float> g = build_step_graph<float>(batch, model_, tau(), sched_, st, step_rng);

    TrainLogRow row;
    row.step = step_count_ + 1;
    row.loss_latent = g.latent->value[0];
    row.loss_var = g.var->value[0];
    row.loss_total = g.total->value[0];
    row.mean_eta = g.mean_eta;
    row.mean_wdev = g.mean_wdev;
    if (!std::isfinite(row.loss_total)) {
        std::ostringstream ss;
        ss << "non-finite loss at step " << row.step << ": latent=" << row.loss_latent
           << " var=" << row.loss_var << " total=" << row.loss_total << " timesteps=";
        for (int64_t t : g.timesteps) ss << t << " ";
        throw std::runtime_error(ss.str());
    }

    backward(g.total);
    opt_.clip_grad_norm(model_.store, cfg_.grad_clip);
    opt_.step(model_.store);
    ++step_count_;

    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

std::vector<TrainLogRow> Trainer::run(int64_t steps) {
    std::vector<TrainLogRow> rows;
    rows.reserve((size_t)steps);
    for (int64_t i = 0; i < steps; ++i) rows.push_back(step());
    return rows;
}

void Trainer::save(const std::string& path) const {
    NamedTensors tensors;
    for (const auto& [name, p] : model_.store.items) tensors.emplace_back(name, p->value);
    for (size_t k = 0; k < model_.store.items.size(); ++k) {
        tensors.emplace_back("opt.m." + model_.store.items[k].first, opt_.m[k]);
        tensors.emplace_back("opt.v." + model_.store.items[k].first, opt_.v[k]);
    }
    Tensor<float> meta({2});
    meta[0] = (float)step_count_;
    meta[1] = (float)opt_.step_count;
    tensors.emplace_back("trainer.state", meta);
    std::vector<std::string> manifest;
    manifest.push_back("# resolved config");
    std::istringstream cfgs(cfg_.serialize());
    std::string line;
    while (std::getline(cfgs, line)) manifest.push_back(line);
    save_checkpoint(path, tensors, manifest);
}

void Trainer::load(const std::string& path) {
    NamedTensors tensors = load_checkpoint(path);
    auto find = [&](const std::string& name) -> const Tensor<float>& {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw ValueError("Trainer::load: checkpoint is missing tensor " + name);
    };
    for (auto& [name, p] : model_.store.items) {
        const Tensor<float>& t = find(name);
        if (t.shape != p->value.shape)
            throw ShapeError("Trainer::load: shape mismatch for " + name + ": checkpoint " +
                             shape_str(t.shape) + " vs model " + shape_str(p->value.shape));
        p->value = t;
    }
    for (size_t k = 0; k < model_.store.items.size(); ++k) {
        opt_.m[k] = find("opt.m." + model_.store.items[k].first);
        opt_.v[k] = find("opt.v." + model_.store.items[k].first);
    }
    const Tensor<float>& meta = find("trainer.state");
    step_count_ = (int64_t)meta[0];
    opt_.step_count = (int64_t)meta[1];
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows) {
    atomic_write_file(path, [&](std::ostream& os) {
        os << "step,loss_latent,loss_var,loss_total,mean_eta,wall_time_s\n";
        os.precision(10);
        for (const auto& r : rows)
            os << r.step << "," << r.loss_latent << "," << r.loss_var << "," << r.loss_total << ","
               << r.mean_eta << "," << r.wall_time_s << "\n";
    });
}

}  // namespace diffdepth
