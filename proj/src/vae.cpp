#include "rebalance/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

VaeModel make_vae(std::size_t data_dim, std::size_t latent_dim, std::size_t hidden_units,
                  std::uint64_t seed) {
    if (data_dim == 0 || latent_dim == 0 || hidden_units == 0)
        throw PreconditionError("make_vae: dimensions must be positive");
    latent_dim = std::min(latent_dim, data_dim);
    const std::size_t enc_widths[] = {data_dim, hidden_units, 2 * latent_dim};
    const std::size_t dec_widths[] = {latent_dim, hidden_units, data_dim};
    const Activation acts[] = {Activation::ReLU, Activation::Identity};
    return {DenseNetwork::glorot(enc_widths, acts, derive_seed(seed, "vae-encoder")),
            DenseNetwork::glorot(dec_widths, acts, derive_seed(seed, "vae-decoder")), latent_dim};
}

void check_vae(const VaeModel& model) {
    if (model.latent_dim == 0) throw PreconditionError("vae: latent_dim must be positive");
    if (model.encoder.output_dim() != 2 * model.latent_dim)
        throw PreconditionError("vae: encoder output must be 2 * latent_dim");
    if (model.decoder.input_dim() != model.latent_dim)
        throw PreconditionError("vae: decoder input must be latent_dim");
    if (model.decoder.output_dim() != model.encoder.input_dim())
        throw PreconditionError("vae: decoder output must equal encoder input");
}

Posterior encode(const VaeModel& model, std::span<const double> f) {
    const auto out = forward(model.encoder, f);
    const auto half = static_cast<std::ptrdiff_t>(model.latent_dim);
    return {{out.begin(), out.begin() + half}, {out.begin() + half, out.end()}};
}

std::vector<double> decode(const VaeModel& model, std::span<const double> z) {
    return forward(model.decoder, z);
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> noise) {
    if (mu.size() != log_var.size() || mu.size() != noise.size())
        throw PreconditionError("reparameterize: length mismatch");
    std::vector<double> z(mu.size());
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = mu[j] + std::exp(0.5 * log_var[j]) * noise[j];
    return z;
}

double kl_to_standard_normal(std::span<const double> mu, std::span<const double> log_var) {
    if (mu.size() != log_var.size()) throw PreconditionError("kl: length mismatch");
    double kl = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j)
        kl += mu[j] * mu[j] + std::exp(log_var[j]) - log_var[j] - 1.0;
    return 0.5 * kl;
}

namespace {

double half_squared_error(std::span<const double> f, std::span<const double> recon) {
    double sum = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) sum += (f[j] - recon[j]) * (f[j] - recon[j]);
    return 0.5 * sum;
}

}  // namespace

ElboTerms elbo(const VaeModel& model, std::span<const double> f, std::span<const double> noise) {
    if (noise.size() != model.latent_dim) throw PreconditionError("elbo: noise length must be latent_dim");
    const auto post = encode(model, f);
    const auto z = reparameterize(post.mu, post.log_var, noise);
    const auto recon = decode(model, z);
    const double rec = -half_squared_error(f, recon);
    const double kl = kl_to_standard_normal(post.mu, post.log_var);
    return {rec - kl, rec, kl};
}

ElboGradient negative_elbo_gradient(const VaeModel& model, std::span<const double> f,
                                    std::span<const double> noise) {
    const std::size_t L = model.latent_dim;
    if (noise.size() != L) throw PreconditionError("elbo: noise length must be latent_dim");

    const auto enc = forward_trace(model.encoder, f);
    const auto out = enc.output();
    std::span<const double> mu = out.subspan(0, L);
    std::span<const double> log_var = out.subspan(L, L);
    const auto z = reparameterize(mu, log_var, noise);
    const auto dec = forward_trace(model.decoder, z);
    const auto recon = dec.output();

    const double rec = -half_squared_error(f, recon);
    const double kl = kl_to_standard_normal(mu, log_var);

    // d(0.5|f - recon|^2)/d recon = recon - f
    std::vector<double> d_recon(recon.size());
    for (std::size_t j = 0; j < recon.size(); ++j) d_recon[j] = recon[j] - f[j];
    auto dec_back = backward(model.decoder, dec, d_recon);

    // z = mu + sigma * eps, sigma = exp(log_var / 2); KL adds mu and (exp(log_var) - 1) / 2.
    std::vector<double> d_enc(2 * L);
    for (std::size_t j = 0; j < L; ++j) {
        const double sigma = std::exp(0.5 * log_var[j]);
        d_enc[j] = dec_back.input[j] + mu[j];
        d_enc[L + j] = dec_back.input[j] * noise[j] * 0.5 * sigma + 0.5 * (std::exp(log_var[j]) - 1.0);
    }
    auto enc_back = backward(model.encoder, enc, d_enc);
    return {{rec - kl, rec, kl}, std::move(enc_back.parameters), std::move(dec_back.parameters)};
}

namespace {

std::vector<double> normal_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

VaeTrainResult train_vae(const EmbeddingDataset& samples, const VaeOptions& options) {
    check_train_config(options.train);
    if (samples.size() < 2)
        throw PreconditionError("train_vae: needs at least 2 samples, got " + std::to_string(samples.size()));
    const auto& cfg = options.train;
    const std::size_t d = samples.dim();

    VaeTrainResult result{make_vae(d, options.latent_dim, options.hidden_units, derive_seed(cfg.seed, "vae-init")),
                          {}, {}, 0};
    auto& model = result.model;
    const std::size_t L = model.latent_dim;

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> held_out;
    if (samples.size() >= 20) {
        Rng rng(derive_seed(cfg.seed, "vae-holdout"));
        rng.shuffle(order);
        const auto n_valid = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(samples.size())));
        held_out.assign(order.end() - static_cast<std::ptrdiff_t>(n_valid), order.end());
        order.resize(order.size() - n_valid);
        std::sort(order.begin(), order.end());
    }
    // Fixed noise so validation ELBO is comparable across epochs.
    std::vector<std::vector<double>> valid_noise;
    {
        Rng rng(derive_seed(cfg.seed, "vae-valid-noise"));
        for (std::size_t i = 0; i < held_out.size(); ++i) valid_noise.push_back(normal_vector(rng, L));
    }

    VaeModel best = model;
    double best_valid = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "vae-epoch", epoch));
        rng.shuffle(order);
        double epoch_elbo = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            auto g_enc = Gradients::zeros_like(model.encoder);
            auto g_dec = Gradients::zeros_like(model.decoder);
            for (std::size_t b = start; b < stop; ++b) {
                const auto noise = normal_vector(rng, L);
                auto g = negative_elbo_gradient(model, samples.row(order[b]), noise);
                if (!std::isfinite(g.terms.value))
                    throw PreconditionError("train_vae: non-finite ELBO at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batch_index));
                epoch_elbo += g.terms.value;
                g_enc += g.encoder;
                g_dec += g.decoder;
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            g_enc *= scale;
            g_dec *= scale;
            try {
                apply_sgd(model.encoder, g_enc, cfg.learning_rate);
                apply_sgd(model.decoder, g_dec, cfg.learning_rate);
            } catch (const PreconditionError& e) {
                throw PreconditionError("train_vae: epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_index) + ": " + e.what());
            }
        }
        result.epoch_mean_elbo.push_back(epoch_elbo / static_cast<double>(order.size()));

        if (held_out.empty()) {
            result.best_epoch = epoch;
            continue;
        }
        double v = 0.0;
        for (std::size_t i = 0; i < held_out.size(); ++i)
            v += elbo(model, samples.row(held_out[i]), valid_noise[i]).value;
        v /= static_cast<double>(held_out.size());
        result.valid_elbo.push_back(v);
        if (v > best_valid) {
            best_valid = v;
            best = model;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    if (!held_out.empty()) model = std::move(best);
    return result;
}

std::vector<std::vector<double>> generate(const VaeModel& model, std::size_t count, std::uint64_t seed) {
    check_vae(model);
    Rng rng(derive_seed(seed, "vae-generate"));
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(decode(model, normal_vector(rng, model.latent_dim)));
    return out;
}

nlohmann::json to_json(const VaeModel& model) {
    return {{"format", "rebalance-vae"},
            {"latent_dim", model.latent_dim},
            {"encoder", to_json(model.encoder)},
            {"decoder", to_json(model.decoder)}};
}

VaeModel vae_from_json(const nlohmann::json& doc) {
    try {
        VaeModel model{network_from_json(doc.at("encoder")), network_from_json(doc.at("decoder")),
                       doc.at("latent_dim").get<std::size_t>()};
        check_vae(model);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed vae checkpoint: ") + e.what());
    } catch (const PreconditionError& e) {
        throw FormatError(std::string("invalid vae checkpoint: ") + e.what());
    }
}

}  // namespace rebalance
