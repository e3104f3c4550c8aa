#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rebalance/dataset.hpp"
#include "rebalance/dense_net.hpp"

namespace rebalance {

/// Gaussian-latent autoencoder over embedding vectors. The encoder emits
/// mu || log_var (2 * latent_dim values); the decoder maps a latent sample
/// back to the embedding dimension.
struct VaeModel {
    DenseNetwork encoder;
    DenseNetwork decoder;
    std::size_t latent_dim = 0;

    std::size_t data_dim() const { return encoder.input_dim(); }
    bool operator==(const VaeModel&) const = default;
};

struct VaeOptions {
    std::size_t latent_dim = 16;  // clamped to the data dimension
    std::size_t hidden_units = 64;
    TrainConfig train{0.01, 32, 200, 0, 10};
};

/// d -> hidden (ReLU) -> 2*latent encoder and latent -> hidden (ReLU) -> d
/// decoder with seeded scaled-uniform weights.
VaeModel make_vae(std::size_t data_dim, std::size_t latent_dim, std::size_t hidden_units,
                  std::uint64_t seed);

/// Checks shapes; throws PreconditionError on inconsistent encoder/decoder.
void check_vae(const VaeModel& model);

struct Posterior {
    std::vector<double> mu;
    std::vector<double> log_var;
};

Posterior encode(const VaeModel& model, std::span<const double> f);
std::vector<double> decode(const VaeModel& model, std::span<const double> z);

/// z = mu + exp(log_var / 2) * noise
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> log_var,
                                   std::span<const double> noise);

/// KL(N(mu, diag(exp(log_var))) || N(0, I)) in closed form.
double kl_to_standard_normal(std::span<const double> mu, std::span<const double> log_var);

struct ElboTerms {
    double value;           // reconstruction - kl
    double reconstruction;  // -0.5 * |f - decode(z)|^2
    double kl;
};

/// Single-sample ELBO estimate with the given standard-normal noise.
ElboTerms elbo(const VaeModel& model, std::span<const double> f, std::span<const double> noise);

struct ElboGradient {
    ElboTerms terms;
    Gradients encoder;  // d(-ELBO)/d encoder parameters
    Gradients decoder;  // d(-ELBO)/d decoder parameters
};

ElboGradient negative_elbo_gradient(const VaeModel& model, std::span<const double> f,
                                    std::span<const double> noise);

struct VaeTrainResult {
    VaeModel model;
    std::vector<double> epoch_mean_elbo;  // training ELBO averaged over each epoch
    std::vector<double> valid_elbo;       // empty when no samples were held out
    std::size_t best_epoch = 0;
};

/// Mini-batch SGD ascent on the ELBO over the rows of `samples`. Holds out 10%
/// for model selection when at least 20 samples exist. Needs >= 2 samples.
VaeTrainResult train_vae(const EmbeddingDataset& samples, const VaeOptions& options);

/// Decodes `count` draws z ~ N(0, I).
std::vector<std::vector<double>> generate(const VaeModel& model, std::size_t count, std::uint64_t seed);

nlohmann::json to_json(const VaeModel& model);
VaeModel vae_from_json(const nlohmann::json& doc);

}  // namespace rebalance
