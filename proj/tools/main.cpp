// Command-line driver: dataset generation, training, ensemble inference,
// evaluation and ablation reproduction.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "ablate.hpp"
#include "common.hpp"
#include "diffdepth/checkpoint.hpp"
#include "diffdepth/codec.hpp"
#include "diffdepth/evalrun.hpp"
#include "diffdepth/imageio.hpp"
#include "diffdepth/sampler.hpp"
#include "diffdepth/trainer.hpp"

namespace fs = std::filesystem;
using namespace diffdepth;

namespace {

int cmd_gen(const std::string& config_path, const std::vector<std::string>& sets, int64_t count,
            const std::string& out_dir) {
    RunConfig cfg = ddtool::resolve_config(config_path, sets);
    if (count > 0) cfg.data_count = count;
    fs::create_directories(out_dir);
    ddtool::write_resolved_config(out_dir, cfg);
    std::vector<Sample> samples = generate(cfg.scene(), cfg.data_count);
    std::vector<ManifestEntry> entries;
    for (size_t i = 0; i < samples.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%05zu", i);
        write_sample(samples[i], out_dir, stem);
        entries.push_back({std::string(stem) + "_depth.pfm", std::string(stem) + "_image.pfm",
                           samples[i].seed});
    }
    write_manifest(out_dir + "/manifest.tsv", entries);
    std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n";
    return 0;
}

std::vector<Sample> load_dataset(const std::string& data_dir) {
    auto entries = read_manifest(data_dir + "/manifest.tsv");
    std::vector<Sample> samples;
    samples.reserve(entries.size());
    for (const auto& e : entries)
        samples.push_back(
            read_sample(data_dir + "/" + e.depth_path, data_dir + "/" + e.image_path, e.seed));
    return samples;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data_dir, const std::string& out_dir,
              const std::string& resume_path) {
    RunConfig cfg = ddtool::resolve_config(config_path, sets);
    fs::create_directories(out_dir);
    ddtool::write_resolved_config(out_dir, cfg);
    std::vector<Sample> data = load_dataset(data_dir);
    Trainer trainer(cfg, data);
    if (!resume_path.empty()) trainer.load(resume_path);
    std::vector<TrainLogRow> log;
    int64_t remaining = cfg.steps - trainer.step_count();
    for (int64_t i = 0; i < remaining; ++i) {
        log.push_back(trainer.step());
        if (cfg.checkpoint_every > 0 && trainer.step_count() % cfg.checkpoint_every == 0)
            trainer.save(out_dir + "/model_step" + std::to_string(trainer.step_count()) + ".ckpt");
        if (log.back().step % 50 == 0)
            std::cout << "step " << log.back().step << " loss " << log.back().loss_total << "\n";
    }
    trainer.save(out_dir + "/model.ckpt");
    write_train_log_csv(out_dir + "/train_log.csv", log);
    std::cout << "trained " << remaining << " steps; checkpoint at " << out_dir << "/model.ckpt\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path, int64_t runs, uint64_t seed,
              int64_t ddim_steps, const std::string& out_dir) {
    RunConfig cfg = ddtool::config_from_manifest(ckpt);
    if (runs > 0) cfg.ensemble_runs = runs;
    if (ddim_steps > 0) cfg.ddim_steps = ddim_steps;
    cfg.seed = seed;
    fs::create_directories(out_dir);
    ddtool::write_resolved_config(out_dir, cfg);

    // reconstruct the model and load weights
    std::vector<Sample> dummy;  // trainer not needed; build params directly
    auto model = init_unet_params<float>(cfg.unet(), cfg.seed);
    model.store.add("biasmap.tau", Tensor<float>::zeros({1}));
    NamedTensors tensors = load_checkpoint(ckpt);
    for (auto& [name, p] : model.store.items)
        for (const auto& [n, t] : tensors)
            if (n == name) {
                if (t.shape != p->value.shape)
                    throw ShapeError("infer: checkpoint shape mismatch for " + name);
                p->value = t;
            }

    Tensor<float> image = read_pfm(image_path);
    NoiseSchedule sched = cfg.schedule();
    InferSettings settings;
    settings.ddim_steps = cfg.ddim_steps;
    settings.runs = cfg.ensemble_runs;
    settings.seed = seed;
    DepthMap pred = ensemble_infer(model, sched, encode_latent(image, cfg.latent_factor),
                                   cfg.latent_factor, settings);

    std::string stem = fs::path(image_path).stem().string();
    Tensor<float> out({1, pred.height, pred.width});
    std::copy(pred.values.begin(), pred.values.end(), out.data.begin());
    write_pfm(out_dir + "/" + stem + "_pred.pfm", out);
    Tensor<float> preview({pred.height, pred.width});
    std::copy(pred.values.begin(), pred.values.end(), preview.data.begin());
    write_pgm(out_dir + "/" + stem + "_preview.pgm", preview, 255, -1.f, 1.f);
    std::cout << "wrote " << out_dir << "/" << stem << "_pred.pfm\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    std::vector<MetricReport> reports;
    std::vector<fs::path> gt_files;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        std::string name = e.path().filename().string();
        if (name.size() > 10 && name.substr(name.size() - 10) == "_depth.pfm")
            gt_files.push_back(e.path());
    }
    std::sort(gt_files.begin(), gt_files.end());
    if (gt_files.empty()) throw ValueError("eval: no *_depth.pfm files in " + gt_dir);
    for (const auto& gt_path : gt_files) {
        std::string stem = gt_path.filename().string();
        stem = stem.substr(0, stem.size() - 10);
        fs::path pred_path = fs::path(pred_dir) / (stem + "_image_pred.pfm");
        if (!fs::exists(pred_path)) pred_path = fs::path(pred_dir) / (stem + "_pred.pfm");
        if (!fs::exists(pred_path)) {
            std::cerr << "eval: missing prediction for " << stem << ", skipping\n";
            continue;
        }
        Tensor<float> gt_img = read_pfm(gt_path.string());
        Tensor<float> pred_img = read_pfm(pred_path.string());
        DepthMap gt(gt_img.dim(1), gt_img.dim(2), "m");
        std::copy(gt_img.data.begin(), gt_img.data.end(), gt.values.begin());
        for (int64_t i = 0; i < gt.pixels(); ++i)
            gt.valid[(size_t)i] = std::isfinite(gt.values[(size_t)i]) && gt.values[(size_t)i] > 0.f;
        DepthMap pred(pred_img.dim(1), pred_img.dim(2), "norm");
        std::copy(pred_img.data.begin(), pred_img.data.end(), pred.values.begin());
        names.push_back(stem);
        reports.push_back(evaluate_image(pred, gt));
    }
    if (reports.empty()) throw ValueError("eval: no prediction/ground-truth pairs found");
    write_metrics_csv(out_dir + "/metrics.csv", names, reports);
    MetricReport agg = aggregate_reports(reports);
    atomic_write_file(out_dir + "/eval.config", [&](std::ostream& os) {
        os << "pred_dir = " << pred_dir << "\ngt_dir = " << gt_dir << "\n";
    });
    std::cout << "absrel " << agg.absrel << " delta1 " << agg.delta1 << " over " << reports.size()
              << " images; wrote " << out_dir << "/metrics.csv\n";
    return 0;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (!cur.empty()) seeds.push_back(std::stoull(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (seeds.empty()) throw ValueError("--seeds: expected comma-separated integers");
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-diffusion depth estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, resume_path, ckpt, image_path, pred_dir, gt_dir;
    std::string suite, seeds_str = "1";
    std::vector<std::string> sets;
    int64_t count = 0, runs = 0, ddim_steps = 0;
    uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset with manifest");
    gen->add_option("--config,-c", config_path, "config file");
    gen->add_option("--set", sets, "override config key=value")->take_all();
    gen->add_option("--count", count, "number of samples (overrides data_count)");
    gen->add_option("--out,-o", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model on a generated dataset");
    train->add_option("--config,-c", config_path, "config file");
    train->add_option("--set", sets, "override config key=value")->take_all();
    train->add_option("--data,-d", data_dir, "dataset directory (with manifest.tsv)")->required();
    train->add_option("--out,-o", out_dir, "output directory")->required();
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* infer = app.add_subcommand("infer", "ensemble inference on one image");
    infer->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    infer->add_option("--image", image_path, "conditioning image (3-channel PFM)")->required();
    infer->add_option("--runs", runs, "ensemble size");
    infer->add_option("--seed", seed, "noise seed");
    infer->add_option("--ddim-steps", ddim_steps, "reverse steps");
    infer->add_option("--out,-o", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "alignment + metrics + range breakdown");
    eval->add_option("--pred-dir", pred_dir, "directory of *_pred.pfm files")->required();
    eval->add_option("--gt-dir", gt_dir, "directory of *_depth.pfm files")->required();
    eval->add_option("--out,-o", out_dir, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "reproduce an ablation suite on synthetic data");
    ablate->add_option("--suite", suite, "biasmap|pooling|gamma|placement|filters|router|overall")
        ->required();
    ablate->add_option("--seeds", seeds_str, "comma-separated seeds (default 1)");
    ablate->add_option("--config,-c", config_path, "base config file");
    ablate->add_option("--set", sets, "override config key=value")->take_all();
    ablate->add_option("--out,-o", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, sets, count, out_dir);
        if (train->parsed()) return cmd_train(config_path, sets, data_dir, out_dir, resume_path);
        if (infer->parsed()) return cmd_infer(ckpt, image_path, runs, seed, ddim_steps, out_dir);
        if (eval->parsed()) return cmd_eval(pred_dir, gt_dir, out_dir);
        if (ablate->parsed()) {
            RunConfig base = ddtool::resolve_config(config_path, sets);
            if (config_path.empty()) {
                // ablation default scale: short runs unless overridden
                bool steps_overridden = false, data_overridden = false;
                for (const auto& s : sets) {
                    if (s.rfind("steps=", 0) == 0) steps_overridden = true;
                    if (s.rfind("data_count=", 0) == 0) data_overridden = true;
                }
                if (!steps_overridden) base.steps = 300;
                if (!data_overridden) base.data_count = 128;
            }
            return ddtool::run_ablation_suite(suite, parse_seeds(seeds_str), base, out_dir);
        }
    } catch (const ValueError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
