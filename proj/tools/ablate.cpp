#include "ablate.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "diffdepth/evalrun.hpp"
#include "diffdepth/fsio.hpp"
#include "diffdepth/trainer.hpp"

namespace ddtool {

using namespace diffdepth;

namespace {

struct ConfigRow {
    std::string label;
    RunConfig cfg;
};

struct SuiteResult {
    std::string label;
    MetricReport mean;           // averaged over seeds
    std::vector<double> absrel;  // per seed
    std::vector<double> far_band;
    std::vector<double> loss_variance;  // per-step loss variance (gamma suite)
    std::vector<double> mean_wdev;      // averaged |w_final-1| (gamma suite)
};

std::vector<ConfigRow> suite_rows(const std::string& suite, const RunConfig& base) {
    std::vector<ConfigRow> rows;
    auto push = [&](const std::string& label,
                    const std::vector<std::pair<std::string, std::string>>& sets) {
        RunConfig c = base;
        for (const auto& [k, v] : sets) c.set(k, v);
        rows.push_back({label, c});
    };
    if (suite == "biasmap") {
        push("baseline", {{"lfm_on", "false"}, {"biasmap_on", "false"}, {"var_loss_on", "false"}});
        push("wdist", {{"lfm_on", "false"}, {"biasmap_on", "true"}, {"w_dist_on", "true"},
                       {"w_struct_on", "false"}, {"var_loss_on", "false"}});
        push("wstruct", {{"lfm_on", "false"}, {"biasmap_on", "true"}, {"w_dist_on", "false"},
                         {"w_struct_on", "true"}, {"var_loss_on", "false"}});
        push("wdist+wstruct", {{"lfm_on", "false"}, {"biasmap_on", "true"}, {"w_dist_on", "true"},
                               {"w_struct_on", "true"}, {"var_loss_on", "false"}});
        push("wdist+wstruct+var", {{"lfm_on", "false"}, {"biasmap_on", "true"},
                                   {"w_dist_on", "true"}, {"w_struct_on", "true"},
                                   {"var_loss_on", "true"}});
    } else if (suite == "pooling") {
        for (const char* pd : {"avg", "max"})
            for (const char* ps : {"avg", "max"})
                push(std::string("dist-") + pd + "_struct-" + ps,
                     {{"lfm_on", "false"}, {"pool_dist", pd}, {"pool_struct", ps}});
    } else if (suite == "gamma") {
        for (const char* g : {"1", "5", "20"})
            push(std::string("gamma-") + g, {{"gamma", g}});
    } else if (suite == "placement") {
        for (const char* pl : {"none", "encoder-early", "middle", "decoder-early",
                               "decoder-penultimate", "decoder-final", "all-blocks"})
            push(std::string("placement-") + pl,
                 {{"biasmap_on", "false"}, {"lfm_on", pl == std::string("none") ? "false" : "true"},
                  {"lfm_placement", pl == std::string("none") ? "decoder-penultimate" : pl}});
    } else if (suite == "filters") {
        for (const char* n : {"1", "2", "4", "8"})
            push(std::string("n-") + n, {{"biasmap_on", "false"}, {"n_masks", n}});
    } else if (suite == "router") {
        for (const char* v : {"fixed", "pm", "le-pm", "le-lkc-pm", "le-sa-pm"})
            push(std::string("router-") + v, {{"biasmap_on", "false"}, {"router_variant", v}});
    } else if (suite == "overall") {
        push("baseline", {{"lfm_on", "false"}, {"biasmap_on", "false"}});
        push("lfm", {{"lfm_on", "true"}, {"biasmap_on", "false"}});
        push("biasmap", {{"lfm_on", "false"}, {"biasmap_on", "true"}});
        push("lfm+biasmap", {{"lfm_on", "true"}, {"biasmap_on", "true"}});
    } else {
        throw ValueError("unknown ablation suite '" + suite +
                         "' (want biasmap|pooling|gamma|placement|filters|router|overall)");
    }
    return rows;
}

double variance_of(const std::vector<double>& xs) {
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= (double)xs.size();
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return var / (double)xs.size();
}

}  // namespace

int run_ablation_suite(const std::string& suite, const std::vector<uint64_t>& seeds,
                       const RunConfig& base, const std::string& out_dir) {
    std::vector<ConfigRow> rows = suite_rows(suite, base);
    std::filesystem::create_directories(out_dir);
    save_config_file(out_dir + "/resolved.config", base);

    bool loss_only = suite == "gamma";
    std::vector<SuiteResult> results;
    for (const auto& row : rows) results.push_back({row.label, MetricReport{}, {}, {}, {}, {}});

    std::vector<MetricReport> accum((size_t)rows.size());
    for (uint64_t seed : seeds) {
        // shared data per seed so every config sees identical samples
        RunConfig data_cfg = base;
        data_cfg.seed = seed;
        std::vector<Sample> train_set = generate(data_cfg.scene(), data_cfg.data_count);
        SceneSpec eval_spec = data_cfg.scene();
        eval_spec.seed = Rng(seed).stream("eval-data").key();
        std::vector<Sample> eval_set = generate(eval_spec, std::max<int64_t>(16, data_cfg.data_count / 4));

        for (size_t ri = 0; ri < rows.size(); ++ri) {
            RunConfig cfg = rows[ri].cfg;
            cfg.seed = seed;
            Trainer trainer(cfg, train_set);
            std::vector<TrainLogRow> log = trainer.run(cfg.steps);
            write_train_log_csv(out_dir + "/loss_" + rows[ri].label + "_seed" +
                                    std::to_string(seed) + ".csv",
                                log);
            std::vector<double> losses, wdevs;
            for (const auto& lr : log) {
                losses.push_back(lr.loss_total);
                wdevs.push_back(lr.mean_wdev);
            }
            results[ri].loss_variance.push_back(variance_of(losses));
            double wd = 0;
            for (double v : wdevs) wd += v;
            results[ri].mean_wdev.push_back(wd / (double)wdevs.size());

            if (!loss_only) {
                InferSettings inf;
                inf.ddim_steps = cfg.ddim_steps;
                inf.runs = cfg.ensemble_runs;
                inf.seed = Rng(seed).stream("eval-infer").key();
                auto reports = evaluate_model(trainer.model(), trainer.schedule(), eval_set,
                                              cfg.latent_factor, inf);
                MetricReport agg = aggregate_reports(reports);
                results[ri].absrel.push_back(agg.absrel);
                results[ri].far_band.push_back(agg.bands[3].delta1);
                // accumulate by summing and dividing later
                accum[ri].absrel += agg.absrel;
                accum[ri].delta1 += agg.delta1;
                accum[ri].valid_pixels += agg.valid_pixels;
                for (int b = 0; b < kNumBands; ++b) {
                    accum[ri].bands[(size_t)b].pixels += agg.bands[(size_t)b].pixels;
                    accum[ri].bands[(size_t)b].delta1 +=
                        agg.bands[(size_t)b].delta1 / (double)seeds.size();
                    accum[ri].bands[(size_t)b].present = true;
                }
            }
            std::cout << "[ablate] " << suite << " seed " << seed << " " << rows[ri].label
                      << " done\n";
        }
    }

    atomic_write_file(out_dir + "/suite_" + suite + ".csv", [&](std::ostream& os) {
        os << "config,absrel,delta1,band1_delta1,band2_delta1,band3_delta1,band4_delta1,"
              "loss_variance,mean_wdev\n";
        for (size_t ri = 0; ri < rows.size(); ++ri) {
            MetricReport m = accum[ri];
            m.absrel /= (double)seeds.size();
            m.delta1 /= (double)seeds.size();
            os << rows[ri].label << "," << m.absrel << "," << m.delta1;
            for (int b = 0; b < kNumBands; ++b) os << "," << m.bands[(size_t)b].delta1;
            double lv = 0, wd = 0;
            for (double v : results[ri].loss_variance) lv += v;
            for (double v : results[ri].mean_wdev) wd += v;
            os << "," << lv / (double)seeds.size() << "," << wd / (double)seeds.size() << "\n";
        }
    });

    atomic_write_file(out_dir + "/summary.txt", [&](std::ostream& os) {
        os << "suite: " << suite << "\nseeds:";
        for (uint64_t s : seeds) os << " " << s;
        os << "\nsteps per run: " << base.steps << "\n\n";
        for (size_t ri = 0; ri < rows.size(); ++ri) {
            os << rows[ri].label << ":";
            if (!results[ri].absrel.empty()) {
                os << " absrel per seed:";
                for (double v : results[ri].absrel) os << " " << v;
                os << " | far-band delta1 per seed:";
                for (double v : results[ri].far_band) os << " " << v;
            }
            os << " | loss variance:";
            for (double v : results[ri].loss_variance) os << " " << v;
            os << "\n";
        }
    });
    return 0;
}

}  // namespace ddtool
