#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wdtcn/model.h"
#include "wdtcn/optim.h"
#include "wdtcn/signal.h"

namespace wdtcn {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 4;
  double lr_initial = 1e-3;
  int lr_halve_patience = 3;
  double clip_seconds = 4.0;
  std::uint64_t seed = 0;
  double grad_clip_norm = 5.0;
  // Share of the corpus held out for validation (floor, none below 2 clips).
  double validation_fraction = 0.125;
  // Worker threads for per-item forward/backward; results do not depend on it.
  std::size_t threads = 1;
  // When set, loss_curve.csv, best.ckpt.json and state.json are written here.
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss_db = 0.0;  // mean negative SI-SDR over training items
  double val_loss_db = 0.0;
  double lr = 0.0;             // rate used during this epoch
  std::size_t clipped_batches = 0;
};

struct TrainState {
  int epoch = 0;  // epochs completed
  double best_validation_loss = std::numeric_limits<double>::infinity();
  PlateauSchedule schedule;
  AdamState adam;
  std::string rng_state;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<EpochRecord> history;
  std::vector<Tensor> best_parameters;
};

// Mean negative SI-SDR (dB) of the model over the selected items.
double evaluate_loss(const Model& model, const std::vector<ReverbSample>& corpus,
                     const std::vector<std::size_t>& indices);

// SI-SDR (dB) of the enhanced output for every sample.
std::vector<double> evaluate_sisdr(const Model& model,
                                   const std::vector<ReverbSample>& corpus);
// SI-SDR (dB) of the unprocessed input for every sample.
std::vector<double> input_sisdr(const std::vector<ReverbSample>& corpus);

// Loss and per-parameter gradients of one item.
struct ItemGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;
};
ItemGradient item_gradient(const Model& model, const ReverbSample& sample);

// Runs epochs state.epoch+1 .. config.epochs, updating `model` in place.
// Clips are fitted to clip_seconds first. Throws TrainingError on a
// non-finite loss.
TrainState train(Model& model, const std::vector<ReverbSample>& corpus,
                 const TrainConfig& config,
                 std::optional<TrainState> resume = std::nullopt);

std::string loss_curve_csv(const std::vector<EpochRecord>& history);

// Full resumable snapshot: model parameters, optimizer moments, schedule,
// RNG state, split, history.
nlohmann::json train_state_to_json(const Model& model, const TrainState& state);
std::pair<Model, TrainState> train_state_from_json(const nlohmann::json& j);

}  // namespace wdtcn
