#include "tripose/adversarial.hpp"

#include "tripose/errors.hpp"
#include "tripose/nn/optim.hpp"
#include "tripose/reprojection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tripose {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

CriticModel::CriticModel(int joints, int hidden, std::uint64_t seed, double clip, double input_scale_mm)
    : joints_(joints), clip_(clip), input_scale_mm_(input_scale_mm) {
  if (joints < 1 || hidden < 1) fail(ErrorCode::InvalidArgument, "critic sizes must be positive");
  if (!(clip > 0.0) || !(input_scale_mm > 0.0)) fail(ErrorCode::InvalidArgument, "critic clip and scale must be positive");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xC817u};
  nn::Rng rng(seq);
  const auto j = static_cast<std::size_t>(joints), h = static_cast<std::size_t>(hidden);
  gru1_ = nn::GruLayer("critic.gru1", 3 * j, h, rng);
  gru2_ = nn::GruLayer("critic.gru2", h, h, rng);
  head_ = nn::Linear("critic.head", h, 1, rng);
  nn::clip_parameters(parameters(), clip_);
}

Var CriticModel::forward(Graph& g, Var sequences) {
  const Shape s = sequences.shape();
  if (s.size() != 3 || s[0] < 1 || s[2] != static_cast<std::size_t>(3 * joints_)) {
    fail(ErrorCode::ShapeMismatch, "critic input must be [T, B, 3J], got " + nn::to_string(s));
  }
  const Var hidden = gru2_.forward(g, gru1_.forward(g, nn::scale(sequences, 1.0 / input_scale_mm_)));
  return head_.forward(g, nn::time_step(hidden, s[0] - 1));
}

double CriticModel::score(const std::vector<Pose3D>& sequence) {
  Graph g;
  return forward(g, g.constant(stack_sequences({sequence}))).value().item();
}

std::vector<nn::Parameter*> CriticModel::parameters() {
  std::vector<nn::Parameter*> out;
  gru1_.collect(out);
  gru2_.collect(out);
  head_.collect(out);
  return out;
}

double CriticModel::max_abs_parameter() {
  double m = 0.0;
  for (const auto* p : parameters())
    for (double v : p->value.values()) m = std::max(m, std::abs(v));
  return m;
}

Tensor stack_sequences(const std::vector<std::vector<Pose3D>>& sequences) {
  if (sequences.empty() || sequences.front().empty()) fail(ErrorCode::EmptyDataset, "no pose sequences");
  const std::size_t t_len = sequences.front().size(), batch = sequences.size();
  const auto joints = static_cast<std::size_t>(sequences.front().front().rows());
  Tensor out(Shape{t_len, batch, 3 * joints});
  for (std::size_t b = 0; b < batch; ++b) {
    if (sequences[b].size() != t_len) fail(ErrorCode::ShapeMismatch, "pose sequences differ in length");
    for (std::size_t t = 0; t < t_len; ++t) {
      const Pose3D& p = sequences[b][t];
      if (static_cast<std::size_t>(p.rows()) != joints) fail(ErrorCode::ShapeMismatch, "poses differ in joint count");
      double* dst = out.data() + (t * batch + b) * 3 * joints;
      for (std::size_t j = 0; j < joints; ++j)
        for (std::size_t c = 0; c < 3; ++c) dst[3 * j + c] = p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

CriticStep critic_step(CriticModel& critic, const Tensor& real, const Tensor& fake, double lr) {
  const auto params = critic.parameters();
  nn::zero_grad(params);
  Graph g;
  const Var gap = nn::mean(critic.forward(g, g.constant(real))) - nn::mean(critic.forward(g, g.constant(fake)));
  g.backward(-gap);
  nn::sgd_step(params, lr);
  nn::clip_parameters(params, critic.clip());
  return {gap.value().item()};
}

Var generator_adversarial_loss(CriticModel& critic, Var fake) { return -nn::mean(critic.forward(fake.graph(), fake)); }

void AdversarialConfig::validate() const {
  network.validate();
  if (critic_hidden < 1 || critic_sequence < 1 || critic_steps < 0 || epochs < 0 || batch_size < 1) {
    fail(ErrorCode::InvalidArgument, "adversarial sizes must be positive");
  }
  if (!(learning_rate > 0.0) || !(critic_learning_rate > 0.0) || !(clip > 0.0)) {
    fail(ErrorCode::InvalidArgument, "adversarial rates and clip must be positive");
  }
  gate.validate();
}

namespace {

struct Sample {
  std::size_t view;
  int frame;  ///< first frame of the critic sequence
};

}  // namespace

AdversarialResult train_adversarial(const std::vector<KeypointSequence2D>& views, const std::vector<Pose3D>& real_poses,
                                    const AdversarialConfig& config) {
  config.validate();
  if (views.empty()) fail(ErrorCode::EmptyDataset, "no views to train on");
  const int len = config.critic_sequence;
  if (config.use_adversarial && static_cast<int>(real_poses.size()) < len) {
    fail(ErrorCode::EmptyDataset, "real pose archive is shorter than one critic sequence");
  }
  const auto joints = static_cast<std::size_t>(config.network.joints);
  std::vector<NormalizedSequence> sequences;
  std::vector<Sample> samples;
  for (std::size_t v = 0; v < views.size(); ++v) {
    views[v].validate(config.network.joints);
    sequences.push_back(normalize_input(views[v]));
    for (int f = 0; f + len <= views[v].frame_count(); ++f) samples.push_back({v, f});
  }
  if (samples.empty()) fail(ErrorCode::SequenceTooShort, "views are shorter than one critic sequence");

  AdversarialResult result;
  result.lifting = LiftingModel(config.network, config.seed);
  result.critic = CriticModel(config.network.joints, config.critic_hidden, config.seed, config.clip);
  nn::Adam adam(result.lifting.parameters(), nn::AdamConfig{config.learning_rate});
  std::mt19937_64 rng(config.seed ^ 0xAD7E55A1ULL);
  std::uniform_int_distribution<std::size_t> pick_real(0, real_poses.size() >= static_cast<std::size_t>(len)
                                                              ? real_poses.size() - static_cast<std::size_t>(len)
                                                              : 0);

  auto real_batch = [&](std::size_t batch) {
    std::vector<std::vector<Pose3D>> seqs(batch);
    for (auto& s : seqs) {
      const std::size_t start = pick_real(rng);
      s.assign(real_poses.begin() + static_cast<std::ptrdiff_t>(start),
               real_poses.begin() + static_cast<std::ptrdiff_t>(start) + len);
    }
    return stack_sequences(seqs);
  };

  // Lifts `len` consecutive frames per sample: returns [len, B, 3J] and the
  // center-frame predictions used by the reprojection term.
  auto lift_batch = [&](Graph& g, const std::vector<Sample>& batch, std::vector<Var>& per_step) {
    per_step.clear();
    for (int k = 0; k < len; ++k) {
      Tensor windows(Shape{static_cast<std::size_t>(config.network.window), batch.size(), 2 * joints});
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor one = make_windows(sequences[batch[b].view], {batch[b].frame + k}, config.network.window);
        for (std::size_t t = 0; t < windows.dim(0); ++t)
          std::copy(one.data() + t * 2 * joints, one.data() + (t + 1) * 2 * joints,
                    windows.data() + (t * batch.size() + b) * 2 * joints);
      }
      per_step.push_back(result.lifting.forward(g, g.constant(std::move(windows))));
    }
    return nn::stack_time(per_step);
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(samples.begin(), samples.end(), rng);
    AdversarialRecord acc{epoch, 0.0, 0.0, 0.0, 0.0};
    std::size_t steps = 0;
    for (std::size_t s = 0; s < samples.size(); s += static_cast<std::size_t>(config.batch_size)) {
      const std::vector<Sample> batch(samples.begin() + static_cast<std::ptrdiff_t>(s),
                                      samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), s + static_cast<std::size_t>(config.batch_size))));
      AdversarialRecord rec{epoch, 0.0, 0.0, 0.0, 0.0};
      if (config.use_adversarial) {
        for (int c = 0; c < config.critic_steps; ++c) {
          Graph fg;
          std::vector<Var> unused;
          const Tensor fake = lift_batch(fg, batch, unused).value();
          rec.critic_gap = critic_step(result.critic, real_batch(batch.size()), fake, config.critic_learning_rate).gap;
        }
      }

      Graph g;
      std::vector<Var> per_step;
      const Var fake = lift_batch(g, batch, per_step);
      // Single-view reprojection of every lifted frame onto its own view.
      std::vector<Var> preds{nn::reshape(fake, Shape{static_cast<std::size_t>(len) * batch.size(), 3 * joints})};
      Tensor obs(Shape{static_cast<std::size_t>(len) * batch.size(), 2 * joints});
      Tensor mask(obs.shape(), 1.0);
      for (int k = 0; k < len; ++k) {
        for (std::size_t b = 0; b < batch.size(); ++b) {
          const auto& view = views[batch[b].view];
          const auto f = static_cast<std::size_t>(batch[b].frame + k);
          const Pose2D n = normalize_2d(view.frames[f]);
          const std::size_t row = static_cast<std::size_t>(k) * batch.size() + b;
          for (std::size_t j = 0; j < joints; ++j) {
            obs[row * 2 * joints + 2 * j] = n(static_cast<Eigen::Index>(j), 0);
            obs[row * 2 * joints + 2 * j + 1] = n(static_cast<Eigen::Index>(j), 1);
            if (view.confidences[f](static_cast<Eigen::Index>(j)) < config.gate.joint_threshold) {
              mask[row * 2 * joints + 2 * j] = mask[row * 2 * joints + 2 * j + 1] = 0.0;
            }
          }
        }
      }
      std::vector<Tensor> observations{std::move(obs)}, masks{std::move(mask)};
      const Var lr = ops::reprojection_loss(preds, observations, [](std::size_t, std::size_t) { return Var{}; },
                                            config.confidence_mask ? std::span<const Tensor>(masks) : std::span<const Tensor>());
      Var total = lr;
      rec.reprojection = lr.value().item();
      if (config.use_adversarial) {
        const Var adv = generator_adversarial_loss(result.critic, fake);
        rec.adversarial = adv.value().item();
        total = lr + adv;
      }
      rec.total = total.value().item();
      if (!std::isfinite(rec.total)) fail(ErrorCode::NonFiniteLoss, "non-finite adversarial loss at epoch " + std::to_string(epoch));
      adam.zero_grad();
      nn::zero_grad(result.critic.parameters());
      g.backward(total);
      adam.step();
      result.steps.push_back(rec);
      acc.reprojection += rec.reprojection;
      acc.adversarial += rec.adversarial;
      acc.critic_gap += rec.critic_gap;
      ++steps;
    }
    const double n = static_cast<double>(steps);
    acc.reprojection /= n;
    acc.adversarial /= n;
    acc.critic_gap /= n;
    acc.total = acc.reprojection + acc.adversarial;
    result.history.push_back(acc);
  }
  return result;
}

}  // namespace tripose
