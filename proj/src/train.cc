#include "wdtcn/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "wdtcn/checkpoint.h"
#include "wdtcn/sisdr.h"
#include "wdtcn/wav.h"

namespace wdtcn {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 0x5EED5EED5EEDULL;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Tensor> take_values(Model& model) {
  std::vector<Tensor> out;
  out.reserve(model.parameters().size());
  for (auto& p : model.parameters()) out.push_back(std::move(p.value));
  return out;
}

void put_values(Model& model, std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    model.parameters()[i].value = std::move(values[i]);
  }
}

std::vector<Tensor> copy_values(const Model& model) {
  std::vector<Tensor> out;
  for (const auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create " + path.string());
  os << text;
}

}  // namespace

ItemGradient item_gradient(const Model& model, const ReverbSample& sample) {
  ForwardResult result = model.forward(sample.input, {}, /*requires_grad=*/true);
  Var loss = sisdr_loss(result.estimate, sample.target.samples);
  backward(loss);
  ItemGradient out;
  out.loss = loss.value()[0];
  out.grads.reserve(result.params.size());
  for (const auto& p : result.params) out.grads.push_back(p.grad());
  return out;
}

double evaluate_loss(const Model& model, const std::vector<ReverbSample>& corpus,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i : indices) {
    const ForwardResult r = model.forward(corpus[i].input);
    total -= sisdr(r.estimate.value().data(), corpus[i].target.samples).value_db;
  }
  return total / static_cast<double>(indices.size());
}

std::vector<double> evaluate_sisdr(const Model& model,
                                   const std::vector<ReverbSample>& corpus) {
  std::vector<double> out;
  for (const auto& s : corpus) {
    const ForwardResult r = model.forward(s.input);
    out.push_back(sisdr(r.estimate.value().data(), s.target.samples).value_db);
  }
  return out;
}

std::vector<double> input_sisdr(const std::vector<ReverbSample>& corpus) {
  std::vector<double> out;
  for (const auto& s : corpus) {
    out.push_back(sisdr(s.input.samples, s.target.samples).value_db);
  }
  return out;
}

TrainState train(Model& model, const std::vector<ReverbSample>& corpus,
                 const TrainConfig& config, std::optional<TrainState> resume) {
  if (corpus.empty()) throw TrainingError("train: corpus is empty");
  if (config.batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (config.clip_seconds <= 0.0) throw ConfigError("train: clip_seconds must be > 0");

  const int fs = corpus.front().input.sample_rate;
  const auto clip_len =
      static_cast<std::size_t>(std::llround(config.clip_seconds * fs));
  std::vector<ReverbSample> data;
  data.reserve(corpus.size());
  for (const auto& s : corpus) data.push_back(fit_length(s, clip_len));

  std::mt19937_64 rng(config.seed);
  TrainState state;
  if (resume) {
    state = std::move(*resume);
    std::istringstream(state.rng_state) >> rng;
  } else {
    state.schedule = PlateauSchedule(config.lr_initial, config.lr_halve_patience);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(config.seed ^ kSplitStream);
    std::shuffle(order.begin(), order.end(), split_rng);
    const std::size_t n_val =
        data.size() < 2 ? 0
                        : static_cast<std::size_t>(config.validation_fraction *
                                                   static_cast<double>(data.size()));
    state.val_indices.assign(order.begin(), order.begin() + n_val);
    state.train_indices.assign(order.begin() + n_val, order.end());
    std::sort(state.val_indices.begin(), state.val_indices.end());
    std::sort(state.train_indices.begin(), state.train_indices.end());
  }

  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  for (int epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = state.schedule.lr();

    std::vector<std::size_t> order = state.train_indices;
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      ++batch_no;
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<ItemGradient> items(count);
      parallel_for(count, config.threads, [&](std::size_t i) {
        items[i] = item_gradient(model, data[order[start + i]]);
      });

      // Fixed-order reduction keeps results independent of thread count.
      std::vector<Tensor> grads = std::move(items[0].grads);
      double batch_loss = items[0].loss;
      for (std::size_t i = 1; i < count; ++i) {
        for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += items[i].grads[k];
        batch_loss += items[i].loss;
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no));
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : grads) g *= inv;
      loss_sum += batch_loss;

      const double norm = clip_global_norm(grads, config.grad_clip_norm);
      if (!std::isfinite(norm)) {
        throw TrainingError("non-finite gradient at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batch_no));
      }
      if (norm > config.grad_clip_norm) {
        ++record.clipped_batches;
        if (config.log) {
          *config.log << "epoch " << epoch << " batch " << batch_no
                      << ": gradient norm " << norm << " clipped to "
                      << config.grad_clip_norm << '\n';
        }
      }

      std::vector<Tensor> values = take_values(model);
      adam_step(values, grads, state.adam, record.lr);
      put_values(model, values);
    }
    record.train_loss_db = loss_sum / static_cast<double>(order.size());
    record.val_loss_db = state.val_indices.empty()
                             ? record.train_loss_db
                             : evaluate_loss(model, data, state.val_indices);

    state.schedule.update(record.val_loss_db);
    const bool improved = record.val_loss_db < state.best_validation_loss;
    if (improved) {
      state.best_validation_loss = record.val_loss_db;
      state.best_parameters = copy_values(model);
    }
    state.epoch = epoch;
    state.history.push_back(record);
    {
      std::ostringstream os;
      os << rng;
      state.rng_state = os.str();
    }

    if (config.log) {
      *config.log << "epoch " << epoch << " train " << record.train_loss_db
                  << " dB val " << record.val_loss_db << " dB lr " << record.lr
                  << '\n';
    }
    if (!config.out_dir.empty()) {
      write_text(config.out_dir / "loss_curve.csv", loss_curve_csv(state.history));
      if (improved) save_checkpoint(config.out_dir / "best.ckpt.json", model);
      write_json_file(config.out_dir / "state.json", train_state_to_json(model, state));
    }
  }
  return state;
}

std::string loss_curve_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss_db,val_loss_db,lr\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + ',' + format_double(r.train_loss_db) + ',' +
           format_double(r.val_loss_db) + ',' + format_double(r.lr) + '\n';
  }
  return out;
}

namespace {

json tensors_to_json(const std::vector<Tensor>& tensors) {
  json out = json::array();
  for (const auto& t : tensors) out.push_back(t.values());
  return out;
}

std::vector<Tensor> tensors_from_json(const json& j, const Model& like) {
  std::vector<Tensor> out;
  if (j.size() != like.parameters().size()) {
    throw IoError("train state: tensor list length does not match the model");
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.emplace_back(like.parameters()[i].value.shape(),
                     j[i].get<std::vector<double>>());
  }
  return out;
}

}  // namespace

json train_state_to_json(const Model& model, const TrainState& state) {
  json history = json::array();
  for (const auto& r : state.history) {
    history.push_back({{"epoch", r.epoch},
                       {"train_loss_db", r.train_loss_db},
                       {"val_loss_db", r.val_loss_db},
                       {"lr", r.lr},
                       {"clipped_batches", r.clipped_batches}});
  }
  const auto& s = state.schedule;
  return json{
      {"model", model_to_json(model)},
      {"epoch", state.epoch},
      {"best_validation_loss", state.best_validation_loss},
      {"schedule",
       {{"lr_initial", s.lr_initial()},
        {"patience", s.patience()},
        {"best", s.best()},
        {"bad_epochs", s.bad_epochs()},
        {"halvings", s.halvings()}}},
      {"adam",
       {{"step", state.adam.step},
        {"m", tensors_to_json(state.adam.m)},
        {"v", tensors_to_json(state.adam.v)}}},
      {"rng_state", state.rng_state},
      {"train_indices", state.train_indices},
      {"val_indices", state.val_indices},
      {"history", std::move(history)},
      {"best_parameters", tensors_to_json(state.best_parameters)},
  };
}

std::pair<Model, TrainState> train_state_from_json(const json& j) {
  Model model = model_from_json(j.at("model"));
  TrainState state;
  try {
    state.epoch = j.at("epoch").get<int>();
    // JSON has no infinity; a never-improved best is stored as null.
    const json& best = j.at("best_validation_loss");
    state.best_validation_loss =
        best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
    const json& s = j.at("schedule");
    state.schedule = PlateauSchedule(s.at("lr_initial").get<double>(),
                                     s.at("patience").get<int>());
    const json& sb = s.at("best");
    state.schedule.restore(
        sb.is_null() ? std::numeric_limits<double>::infinity() : sb.get<double>(),
        s.at("bad_epochs").get<int>(), s.at("halvings").get<int>());
    const json& adam = j.at("adam");
    state.adam.step = adam.at("step").get<std::uint64_t>();
    if (!adam.at("m").empty()) {
      state.adam.m = tensors_from_json(adam.at("m"), model);
      state.adam.v = tensors_from_json(adam.at("v"), model);
    }
    state.rng_state = j.at("rng_state").get<std::string>();
    state.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
    state.val_indices = j.at("val_indices").get<std::vector<std::size_t>>();
    for (const auto& r : j.at("history")) {
      state.history.push_back({r.at("epoch").get<int>(),
                               r.at("train_loss_db").get<double>(),
                               r.at("val_loss_db").get<double>(),
                               r.at("lr").get<double>(),
                               r.at("clipped_batches").get<std::size_t>()});
    }
    if (!j.at("best_parameters").empty()) {
      state.best_parameters = tensors_from_json(j.at("best_parameters"), model);
    }
  } catch (const json::exception& ex) {
    throw IoError(std::string("train state: ") + ex.what());
  }
  return {std::move(model), std::move(state)};
}

}  // namespace wdtcn
