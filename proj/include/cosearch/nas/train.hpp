#pragma once

#include "cosearch/nas/modules.hpp"
#include "cosearch/sigproc/stft.hpp"

#include <functional>
#include <span>
#include <vector>

namespace cosearch::nas {

// Beats converted to network-ready grids.
struct GridData {
  sigproc::StftConfig stft;
  int in_channels = 0;   // real planes
  int out_channels = 0;  // real planes
  int grid = 16;
  std::vector<std::vector<double>> inputs;   // in_channels * grid * grid per beat
  std::vector<std::vector<double>> targets;  // out_channels * grid * grid per beat
  std::vector<sigproc::Signal> ecg;          // measured ECG time series
  std::vector<std::size_t> train, test;
};

// EGM planes are scaled by 1/sqrt(window_len). `egm_channels` selects the EGM
// rows used as input (all 5 by default).
GridData prepare_grids(const sigproc::Dataset& ds, std::vector<int> egm_channels = {},
                       const sigproc::StftConfig& cfg = {});

// Stacks the selected beats into (N, C, grid, grid) tensors.
ad::Tensor4 batch_inputs(const GridData& data, std::span<const std::size_t> idx);
ad::Tensor4 batch_targets(const GridData& data, std::span<const std::size_t> idx);

// Reshuffles the index list every epoch.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> pool, int batch, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  std::vector<std::size_t> pool_;
  std::size_t pos_ = 0;
  int batch_;
  std::mt19937_64 rng_;
};

struct EvalResult {
  std::vector<double> per_channel;  // mean over beats, one per ECG lead
  double mean = 0.0;
  int degenerate = 0;  // (beat, lead) pairs with zero variance
};

// Pearson of istft(prediction) against the measured ECG, per lead.
EvalResult evaluate(const Network& net, const GridData& data, std::span<const std::size_t> idx);

struct TrainConfig {
  int epochs = 40;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network net;
  EvalResult test;
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double train_loss)>;

// Trains `spec` from scratch; throws NumericDivergence on a non-finite loss.
TrainResult train_network(const NetworkSpec& spec, const GridData& data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

}  // namespace cosearch::nas
