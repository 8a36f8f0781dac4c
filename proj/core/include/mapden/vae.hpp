#ifndef MAPDEN_VAE_HPP
#define MAPDEN_VAE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mapden/adam.hpp"
#include "mapden/dataset.hpp"
#include "mapden/rng.hpp"
#include "mapden/tape.hpp"
#include "mapden/tensor.hpp"

namespace mapden {

struct VaeConfig {
    std::size_t input_dim = kWindowLen;
    std::size_t latent_dim = 32;
    std::size_t batch_size = 32;
    double beta = 1.0;
    std::size_t mc_samples = 1; // latent draws per item in the loss
    double likelihood_sigma = 0.1;
    std::vector<std::size_t> encoder_channels = {16, 32, 32, 64, 64, 128};
    std::size_t kernel_size = 5;
    std::vector<std::size_t> strides = {2, 1, 2, 1, 2, 1};
    double lr = 1e-3;
    std::size_t epochs = 60;
    std::uint64_t seed = 7;

    void validate() const;
    nlohmann::json to_json() const;
    static VaeConfig from_json(const nlohmann::json& j);
    bool operator==(const VaeConfig&) const = default;
};

/// Geometry of one conv / transposed-conv layer. For decoder layers the
/// padding is chosen to reach at least the mirrored encoder length and
/// crop_to trims the overshoot (at most one sample).
struct ConvPlan {
    std::size_t cin = 0, cout = 0, kernel = 0, stride = 1, pad = 0;
    std::size_t in_len = 0, out_len = 0;
    std::size_t crop_to = 0; // 0 = no crop
};

struct ArchPlan {
    std::vector<ConvPlan> encoder;
    std::size_t flat_dim = 0;
    std::vector<ConvPlan> decoder;
};

/// Derives layer geometry from the config; throws InvalidParamsError when the
/// stack cannot produce the requested shapes.
ArchPlan plan_architecture(const VaeConfig& config);

/// Encoder (convs + mu/logvar heads) and decoder (linear + transposed convs)
/// parameters. Tensors require grad; ownership is by value.
struct VaeModel {
    VaeConfig config;
    ArchPlan plan;

    std::vector<ad::Tensor> enc_w, enc_b;
    ad::Tensor mu_w, mu_b, logvar_w, logvar_b;
    ad::Tensor dec_lin_w, dec_lin_b;
    std::vector<ad::Tensor> dec_w, dec_b;

    static VaeModel init(const VaeConfig& config);

    std::vector<ad::Tensor*> parameters();
    std::vector<const ad::Tensor*> parameters() const;
    void zero_grad();
};

// ---------------------------------------------------------------------------
// Graph builders (differentiable paths used by the loss).
// ---------------------------------------------------------------------------

struct EncodeHeads {
    ad::VarId mu;
    ad::VarId logvar;
};

EncodeHeads encode_graph(ad::Tape& tape, VaeModel& model, ad::VarId x);
ad::VarId decode_graph(ad::Tape& tape, VaeModel& model, ad::VarId z);

/// z = mu + exp(logvar/2) * eps with eps recorded as a constant, so gradient
/// flows to mu and logvar only.
ad::VarId reparameterize_graph(ad::Tape& tape, ad::VarId mu, ad::VarId logvar,
                               const ad::Tensor& eps);

/// 0.5 * sum(mu^2 + exp(logvar) - logvar - 1) over all batch items.
ad::VarId kl_sum_graph(ad::Tape& tape, ad::VarId mu, ad::VarId logvar);

struct ElboResult {
    ad::VarId loss;       // batch-mean negative ELBO, differentiable
    double neg_elbo = 0;  // value of loss
    double recon_term = 0;
    double kl_term = 0; // batch-mean KL (the beta-weighted part divided by beta)
};

/// Encodes x_noisy, draws mc_samples latents, decodes each, scores the
/// Gaussian likelihood against x_clean, and adds beta times the batch-mean
/// KL. Both inputs are [B,1,input_dim].
ElboResult elbo_graph(ad::Tape& tape, VaeModel& model, const ad::Tensor& x_clean,
                      const ad::Tensor& x_noisy, double beta, std::size_t mc_samples,
                      double sigma, Prng& rng);

// ---------------------------------------------------------------------------
// Value-level API.
// ---------------------------------------------------------------------------

/// Forward pass without gradients; returns (mu, logvar), each [B, latent_dim].
std::pair<ad::Tensor, ad::Tensor> encode(VaeModel& model, const ad::Tensor& x);

ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& logvar, std::uint64_t seed);

/// Closed-form KL against the standard normal prior, one value per batch item.
std::vector<double> kl_divergence(const ad::Tensor& mu, const ad::Tensor& logvar);

ad::Tensor decode(VaeModel& model, const ad::Tensor& z);

double elbo_loss(VaeModel& model, const ad::Tensor& x_clean, const ad::Tensor& x_noisy,
                 double beta, std::size_t mc_samples, double sigma, std::uint64_t seed);

/// Posterior-mean inference: decode(mu(x)), clamped to [0,1].
Beat denoise(VaeModel& model, const Beat& noisy);

/// Batched denoise of many beats in input order.
std::vector<Beat> denoise_batch(VaeModel& model, const std::vector<Beat>& noisy);

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch;
    std::string split; // "train" or "test"
    double neg_elbo;
    double recon_term;
    double kl_term;
};

struct TrainingReport {
    std::vector<EpochLog> logs;
    std::size_t best_epoch = 0;
    double best_test_neg_elbo = 0.0;
    std::size_t optimizer_steps = 0;
    bool posterior_collapse = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch Adam on the negative ELBO over the paired train split, test
/// metrics every epoch, best-test model restored at the end. Deterministic
/// under config.seed. on_epoch, when set, observes every log row as it is
/// produced.
TrainingReport train(VaeModel& model, const Dataset& paired, const EpochCallback& on_epoch = {});

void write_train_log(const TrainingReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Checkpointing: version-tagged binary, raw little-endian float64 payload.
// ---------------------------------------------------------------------------

void save_checkpoint(const VaeModel& model, const std::string& path,
                     const std::string& pipeline_hash = "");

/// Loads a checkpoint; when expected_config is given, any config difference
/// raises CheckpointError. Returns the pipeline hash stamp alongside.
std::pair<VaeModel, std::string> load_checkpoint(const std::string& path,
                                                 const VaeConfig* expected_config = nullptr);

} // namespace mapden

#endif
