#pragma once

#include <string>
#include <vector>

#include "diffdepth/config.hpp"
#include "diffdepth/optimizer.hpp"
#include "diffdepth/train_graph.hpp"

namespace diffdepth {

// Training log row. The CSV written next to checkpoints has the columns
// (step, loss_latent, loss_var, loss_total, mean_eta, wall_time_s).
struct TrainLogRow {
    int64_t step = 0;
    double loss_latent = 0.0, loss_var = 0.0, loss_total = 0.0;
    double mean_eta = 0.0;
    double wall_time_s = 0.0;
    double mean_wdev = 0.0;  // not part of the CSV schema
};

// End-to-end trainer: owns the model, gate bias, optimizer and prepared
// dataset. All per-step randomness is derived from (seed, step index), so
// save/load of (params, optimizer moments, step counter) resumes
// bit-exactly.
class Trainer {
public:
    Trainer(RunConfig cfg, const std::vector<Sample>& data);

    TrainLogRow step();
    std::vector<TrainLogRow> run(int64_t steps);

    void save(const std::string& path) const;
    void load(const std::string& path);

    const UNetParams<float>& model() const { return model_; }
    UNetParams<float>& model() { return model_; }
    Var<float> tau() const { return model_.store.get("biasmap.tau"); }
    int64_t step_count() const { return step_count_; }
    const RunConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return sched_; }

private:
    RunConfig cfg_;
    NoiseSchedule sched_;
    UNetParams<float> model_;
    AdamW<float> opt_;
    std::vector<PreparedSample<float>> prepared_;
    int64_t step_count_ = 0;
};

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace diffdepth
