#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wdtcn/tensor.h"

namespace wdtcn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

// Bias-corrected Adam update in place. Moments are created on the first
// call; later calls require matching shapes.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState& state, double lr, const AdamOptions& options = {});

// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the
// norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

// Halves the learning rate once validation loss has failed to strictly
// improve for `patience` consecutive epochs.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(double lr_initial = 1e-3, int patience = 3)
      : lr_initial_(lr_initial), patience_(patience) {}

  // Feeds one epoch's validation loss; returns true if the rate was halved.
  bool update(double validation_loss);

  double lr() const;
  double lr_initial() const { return lr_initial_; }
  int patience() const { return patience_; }
  int halvings() const { return halvings_; }
  int bad_epochs() const { return bad_epochs_; }
  double best() const { return best_; }

  // Restores the counters of a previous run.
  void restore(double best, int bad_epochs, int halvings) {
    best_ = best;
    bad_epochs_ = bad_epochs;
    halvings_ = halvings;
  }

 private:
  double lr_initial_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
  int halvings_ = 0;
};

}  // namespace wdtcn
