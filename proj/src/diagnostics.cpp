#include "disfl/diagnostics.hpp"

#include "disfl/trainer.hpp"

namespace disfl {

namespace {

model::Batch random_batch(Rng& rng, std::size_t n, std::size_t len, std::size_t vocab, bool labeled) {
  model::Batch b;
  b.size = n;
  b.len = len;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t real = 1 + uniform_index(rng, len);
    for (std::size_t i = 0; i < len; ++i) {
      const bool on = i < real;
      b.ids.push_back(on ? static_cast<std::int32_t>(1 + uniform_index(rng, vocab - 1)) : 0);
      b.mask.push_back(on ? 1 : 0);
      b.labels.push_back(on ? static_cast<std::int32_t>(uniform_index(rng, 2)) : 0);
      b.label_mask.push_back(on && labeled ? 1 : 0);
    }
  }
  return b;
}

}  // namespace

LossGradCheck check_loss_gradients(std::uint64_t seed, double h, double param_scale, std::size_t max_coords) {
  model::ModelConfig cfg;
  cfg.encoder.vocab_size = 30;
  cfg.encoder.model_dim = 16;
  cfg.encoder.max_len = 8;
  cfg.encoder.n_layers = 2;
  cfg.encoder.n_heads = 2;
  cfg.encoder.feedforward_dim = 32;
  cfg.generator.noise_dim = 8;
  cfg.generator.hidden_dim = 16;
  model::SeqGan<double> m(cfg, seed);

  Rng rng(split_seed(seed, 77));
  std::normal_distribution<double> normal(0.0, param_scale);
  for (auto& p : m.params()) {
    const bool gain = p.name.ends_with(".gain");
    for (auto& v : p.mutable_value().values()) v = (gain ? 1.0 : 0.0) + normal(rng);
  }
  const auto labeled = random_batch(rng, 3, cfg.encoder.max_len, cfg.encoder.vocab_size, true);
  const auto unlabeled = random_batch(rng, 2, cfg.encoder.max_len, cfg.encoder.vocab_size, false);
  const auto noise = model::sample_noise<double>(rng, 5, cfg.generator.noise_dim);

  std::vector<tc::Parameter<double>> d_params = m.params(model::ParamGroup::Encoder);
  for (const auto& p : m.params(model::ParamGroup::Discriminator)) d_params.push_back(p);

  LossGradCheck out;
  out.discriminator = tc::grad_check<double>([&] { return d_loss(m, labeled, unlabeled, noise).total; }, d_params, h,
                                             split_seed(seed, 1), max_coords);
  const auto real = [&] {
    tc::NoGradGuard no_grad;
    return m.encode(labeled);
  }();
  out.generator = tc::grad_check<double>([&] { return g_loss(m, noise, real, 1.0).total; },
                                         m.params(model::ParamGroup::Generator), h, split_seed(seed, 2), max_coords);
  const auto& worst =
      out.discriminator.max_rel_error >= out.generator.max_rel_error ? out.discriminator : out.generator;
  out.max_rel_error = worst.max_rel_error;
  out.worst_param = worst.worst_param;
  return out;
}

}  // namespace disfl
