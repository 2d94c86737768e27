#include "cosearch/nas/train.hpp"

#include "cosearch/autodiff/adam.hpp"
#include "cosearch/core/errors.hpp"
#include "cosearch/sigproc/pearson.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cosearch::nas {

namespace {

constexpr std::size_t kEvalChunk = 64;

ad::Tensor4 stack(const std::vector<std::vector<double>>& rows, int channels, int grid,
                  std::span<const std::size_t> idx) {
  ad::Tensor4 t({static_cast<int>(idx.size()), channels, grid, grid});
  const std::size_t per = static_cast<std::size_t>(channels) * grid * grid;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& src = rows.at(idx[i]);
    std::memcpy(t.data() + i * per, src.data(), per * sizeof(double));
  }
  return t;
}

}  // namespace

GridData prepare_grids(const sigproc::Dataset& ds, std::vector<int> egm_channels,
                       const sigproc::StftConfig& cfg) {
  cfg.validate();
  if (egm_channels.empty())
    for (int c = 0; c < sigproc::kEgmChannels; ++c) egm_channels.push_back(c);
  for (int c : egm_channels)
    if (c < 0 || c >= sigproc::kEgmChannels) throw ParameterError("egm channel out of range");

  GridData g;
  g.stft = cfg;
  g.grid = cfg.n_bins();
  const int frames = cfg.n_frames(sigproc::kBeatLength);
  if (frames != g.grid || cfg.signal_len(frames) != sigproc::kBeatLength)
    throw ParameterError("stft config must give a square grid covering the beat exactly");
  g.in_channels = 2 * static_cast<int>(egm_channels.size());
  g.out_channels = 2 * sigproc::kEcgChannels;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(cfg.window_len));

  for (const auto& beat : ds.beats) {
    sigproc::validate_beat(beat);
    sigproc::Signal egm(egm_channels.size(), beat.egm.cols());
    for (std::size_t i = 0; i < egm_channels.size(); ++i) egm.row(i) = beat.egm.row(egm_channels[i]);
    auto x = sigproc::stft(egm, cfg, frames).to_planes();
    for (double& v : x) v *= in_scale;
    g.inputs.push_back(std::move(x));
    g.targets.push_back(sigproc::stft(beat.ecg, cfg, frames).to_planes());
    g.ecg.push_back(beat.ecg);
  }
  g.train = ds.train;
  g.test = ds.test;
  return g;
}

ad::Tensor4 batch_inputs(const GridData& data, std::span<const std::size_t> idx) {
  return stack(data.inputs, data.in_channels, data.grid, idx);
}

ad::Tensor4 batch_targets(const GridData& data, std::span<const std::size_t> idx) {
  return stack(data.targets, data.out_channels, data.grid, idx);
}

BatchSampler::BatchSampler(std::vector<std::size_t> pool, int batch, std::uint64_t seed)
    : pool_(std::move(pool)), pos_(pool_.size()), batch_(batch), rng_(seed) {
  if (pool_.empty() || batch < 1) throw ParameterError("BatchSampler: empty pool or batch < 1");
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  while (static_cast<int>(out.size()) < batch_) {
    if (pos_ == pool_.size()) {
      for (std::size_t i = pool_.size() - 1; i > 0; --i)
        std::swap(pool_[i], pool_[rng_() % (i + 1)]);
      pos_ = 0;
    }
    out.push_back(pool_[pos_++]);
  }
  return out;
}

EvalResult evaluate(const Network& net, const GridData& data, std::span<const std::size_t> idx) {
  const int leads = data.out_channels / 2;
  EvalResult res;
  res.per_channel.assign(leads, 0.0);
  if (idx.empty()) return res;
  for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
    const auto chunk = idx.subspan(start, std::min(kEvalChunk, idx.size() - start));
    ad::Tape tape(false);
    const auto pred = net.forward(tape, ad::constant(batch_inputs(data, chunk)));
    const std::size_t per = static_cast<std::size_t>(data.out_channels) * data.grid * data.grid;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto grid = sigproc::TFGrid::from_planes(pred->value.data() + i * per, leads, data.grid,
                                                     data.grid);
      const sigproc::Signal y = sigproc::istft(grid, data.stft);
      const sigproc::Signal& ref = data.ecg[chunk[i]];
      for (int c = 0; c < leads; ++c) {
        const Eigen::VectorXd a = y.row(c).transpose(), b = ref.row(c).transpose();
        const auto p = sigproc::pearson({a.data(), static_cast<std::size_t>(a.size())},
                                        {b.data(), static_cast<std::size_t>(b.size())});
        res.degenerate += p.degenerate;
        res.per_channel[c] += p.r;
      }
    }
  }
  for (double& v : res.per_channel) {
    v /= static_cast<double>(idx.size());
    res.mean += v / leads;
  }
  return res;
}

TrainResult train_network(const NetworkSpec& spec, const GridData& data, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
  if (spec.in_channels != data.in_channels || spec.out_channels != data.out_channels ||
      spec.grid != data.grid)
    throw ShapeError("train_network: spec does not match the data grids");
  if (cfg.epochs < 0 || cfg.batch < 1) throw ParameterError("train_network: bad epochs/batch");
  if (data.train.empty()) throw ParameterError("train_network: empty training split");

  TrainResult out{Network(spec, cfg.seed), {}, {}};
  ad::Adam opt(out.net.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  BatchSampler sampler(data.train, cfg.batch, cfg.seed ^ 0x5bd1e995ull);
  const std::size_t steps_per_epoch = (data.train.size() + cfg.batch - 1) / cfg.batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double acc = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const auto idx = sampler.next();
      ad::Tape tape;
      const auto pred = out.net.forward(tape, ad::constant(batch_inputs(data, idx)));
      const auto loss = ad::pearson_loss(tape, pred, ad::constant(batch_targets(data, idx))).loss;
      const double l = loss->value[0];
      if (!std::isfinite(l))
        throw NumericDivergence("train_network: non-finite loss at epoch " + std::to_string(epoch) +
                                ", step " + std::to_string(s));
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      acc += l;
    }
    out.epoch_loss.push_back(acc / steps_per_epoch);
    if (on_epoch) on_epoch(epoch, out.epoch_loss.back());
  }
  out.test = evaluate(out.net, data, data.test);
  return out;
}

}  // namespace cosearch::nas
