#include "mapden/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "mapden/errors.hpp"

namespace mapden {

void VaeConfig::validate() const {
    if (input_dim < 8 || latent_dim < 1 || batch_size < 1 || mc_samples < 1 ||
        encoder_channels.empty() || kernel_size < 1 || epochs < 1) {
        throw InvalidParamsError("VaeConfig has a non-positive dimension");
    }
    if (strides.size() != encoder_channels.size()) {
        throw InvalidParamsError("strides and encoder_channels must have equal length");
    }
    if (!(beta >= 0.0) || !(likelihood_sigma > 0.0) || !(lr > 0.0)) {
        throw InvalidParamsError("beta >= 0, likelihood_sigma > 0 and lr > 0 required");
    }
}

nlohmann::json VaeConfig::to_json() const {
    return nlohmann::json{{"input_dim", input_dim},
                          {"latent_dim", latent_dim},
                          {"batch_size", batch_size},
                          {"beta", beta},
                          {"mc_samples", mc_samples},
                          {"likelihood_sigma", likelihood_sigma},
                          {"encoder_channels", encoder_channels},
                          {"kernel_size", kernel_size},
                          {"strides", strides},
                          {"lr", lr},
                          {"epochs", epochs},
                          {"seed", seed}};
}

VaeConfig VaeConfig::from_json(const nlohmann::json& j) {
    VaeConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "input_dim") value.get_to(c.input_dim);
        else if (key == "latent_dim") value.get_to(c.latent_dim);
        else if (key == "batch_size") value.get_to(c.batch_size);
        else if (key == "beta") value.get_to(c.beta);
        else if (key == "mc_samples") value.get_to(c.mc_samples);
        else if (key == "likelihood_sigma") value.get_to(c.likelihood_sigma);
        else if (key == "encoder_channels") value.get_to(c.encoder_channels);
        else if (key == "kernel_size") value.get_to(c.kernel_size);
        else if (key == "strides") value.get_to(c.strides);
        else if (key == "lr") value.get_to(c.lr);
        else if (key == "epochs") value.get_to(c.epochs);
        else if (key == "seed") value.get_to(c.seed);
        else throw InvalidParamsError("unknown VaeConfig key '" + key + "'");
    }
    c.validate();
    return c;
}

ArchPlan plan_architecture(const VaeConfig& config) {
    config.validate();
    ArchPlan plan;
    const std::size_t k = config.kernel_size;
    const std::size_t pad = k / 2;

    std::size_t len = config.input_dim;
    std::size_t cin = 1;
    for (std::size_t i = 0; i < config.encoder_channels.size(); ++i) {
        ConvPlan layer;
        layer.cin = cin;
        layer.cout = config.encoder_channels[i];
        layer.kernel = k;
        layer.stride = config.strides[i];
        layer.pad = pad;
        layer.in_len = len;
        const std::ptrdiff_t lout =
            (static_cast<std::ptrdiff_t>(len) + 2 * static_cast<std::ptrdiff_t>(pad) -
             static_cast<std::ptrdiff_t>(k)) /
                static_cast<std::ptrdiff_t>(layer.stride) +
            1;
        if (lout < 1) {
            throw InvalidParamsError("encoder layer " + std::to_string(i) +
                                     " collapses the sequence");
        }
        layer.out_len = static_cast<std::size_t>(lout);
        len = layer.out_len;
        cin = layer.cout;
        plan.encoder.push_back(layer);
    }
    plan.flat_dim = cin * len;
    if (plan.flat_dim < config.latent_dim) {
        throw InvalidParamsError("flatten dimension " + std::to_string(plan.flat_dim) +
                                 " is smaller than latent_dim");
    }

    // Mirror: decoder layer i undoes encoder layer n-1-i, landing on its
    // input length (cropping at most the overshoot).
    const std::size_t n = plan.encoder.size();
    for (std::size_t i = 0; i < n; ++i) {
        const ConvPlan& enc = plan.encoder[n - 1 - i];
        ConvPlan layer;
        layer.cin = enc.cout;
        layer.cout = enc.cin;
        layer.kernel = k;
        layer.stride = enc.stride;
        layer.in_len = enc.out_len;
        const std::size_t target = enc.in_len;
        const std::size_t raw_full = (layer.in_len - 1) * layer.stride + k;
        if (raw_full < target) {
            throw InvalidParamsError("decoder layer " + std::to_string(i) +
                                     " cannot reach length " + std::to_string(target));
        }
        layer.pad = std::min(pad, (raw_full - target) / 2);
        const std::size_t raw = raw_full - 2 * layer.pad;
        layer.crop_to = raw == target ? 0 : target;
        layer.out_len = target;
        plan.decoder.push_back(layer);
    }
    return plan;
}

namespace {

ad::Tensor init_uniform(ad::Shape shape, double bound, Prng& rng) {
    ad::Tensor t = ad::Tensor::zeros(std::move(shape), true);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

constexpr char kCheckpointMagic[] = "MAPDENCK1";

} // namespace

VaeModel VaeModel::init(const VaeConfig& config) {
    VaeModel m;
    m.config = config;
    m.plan = plan_architecture(config);
    Prng rng(rng::mix(config.seed, 0xA11C0DEULL));

    for (const ConvPlan& l : m.plan.encoder) {
        const double bound = std::sqrt(1.0 / static_cast<double>(l.cin * l.kernel));
        m.enc_w.push_back(init_uniform({l.cout, l.cin, l.kernel}, bound, rng));
        m.enc_b.push_back(init_uniform({l.cout}, bound, rng));
    }
    const double head_bound = std::sqrt(1.0 / static_cast<double>(m.plan.flat_dim));
    m.mu_w = init_uniform({config.latent_dim, m.plan.flat_dim}, head_bound, rng);
    m.mu_b = init_uniform({config.latent_dim}, head_bound, rng);
    m.logvar_w = init_uniform({config.latent_dim, m.plan.flat_dim}, head_bound, rng);
    m.logvar_b = init_uniform({config.latent_dim}, head_bound, rng);

    const double lin_bound = std::sqrt(1.0 / static_cast<double>(config.latent_dim));
    m.dec_lin_w = init_uniform({m.plan.flat_dim, config.latent_dim}, lin_bound, rng);
    m.dec_lin_b = init_uniform({m.plan.flat_dim}, lin_bound, rng);
    for (const ConvPlan& l : m.plan.decoder) {
        const double bound = std::sqrt(1.0 / static_cast<double>(l.cin * l.kernel));
        m.dec_w.push_back(init_uniform({l.cin, l.cout, l.kernel}, bound, rng));
        m.dec_b.push_back(init_uniform({l.cout}, bound, rng));
    }
    return m;
}

std::vector<ad::Tensor*> VaeModel::parameters() {
    std::vector<ad::Tensor*> out;
    for (auto& t : enc_w) out.push_back(&t);
    for (auto& t : enc_b) out.push_back(&t);
    out.push_back(&mu_w);
    out.push_back(&mu_b);
    out.push_back(&logvar_w);
    out.push_back(&logvar_b);
    out.push_back(&dec_lin_w);
    out.push_back(&dec_lin_b);
    for (auto& t : dec_w) out.push_back(&t);
    for (auto& t : dec_b) out.push_back(&t);
    return out;
}

std::vector<const ad::Tensor*> VaeModel::parameters() const {
    auto mutable_params = const_cast<VaeModel*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

void VaeModel::zero_grad() {
    for (ad::Tensor* t : parameters()) t->zero_grad();
}

EncodeHeads encode_graph(ad::Tape& tape, VaeModel& model, ad::VarId x) {
    const ad::Shape& xs = tape.shape(x);
    if (xs.size() != 3 || xs[1] != 1 || xs[2] != model.config.input_dim) {
        throw ShapeError("encode expects [B,1," + std::to_string(model.config.input_dim) +
                         "], got " + ad::shape_str(xs));
    }
    ad::VarId h = x;
    for (std::size_t i = 0; i < model.plan.encoder.size(); ++i) {
        const ConvPlan& l = model.plan.encoder[i];
        ad::VarId w = tape.leaf(model.enc_w[i]);
        ad::VarId b = tape.leaf(model.enc_b[i]);
        h = tape.conv1d(h, w, b, l.stride, l.pad);
        h = tape.leaky_relu(h);
    }
    h = tape.flatten(h);
    EncodeHeads heads;
    heads.mu = tape.linear(h, tape.leaf(model.mu_w), tape.leaf(model.mu_b));
    heads.logvar = tape.linear(h, tape.leaf(model.logvar_w), tape.leaf(model.logvar_b));
    return heads;
}

ad::VarId decode_graph(ad::Tape& tape, VaeModel& model, ad::VarId z) {
    const ad::Shape& zs = tape.shape(z);
    if (zs.size() != 2 || zs[1] != model.config.latent_dim) {
        throw ShapeError("decode expects [B," + std::to_string(model.config.latent_dim) +
                         "], got " + ad::shape_str(zs));
    }
    const std::size_t batch = zs[0];
    ad::VarId h = tape.linear(z, tape.leaf(model.dec_lin_w), tape.leaf(model.dec_lin_b));
    h = tape.leaky_relu(h);
    const ConvPlan& first = model.plan.decoder.front();
    h = tape.reshape(h, {batch, first.cin, first.in_len});
    for (std::size_t i = 0; i < model.plan.decoder.size(); ++i) {
        const ConvPlan& l = model.plan.decoder[i];
        ad::VarId w = tape.leaf(model.dec_w[i]);
        ad::VarId b = tape.leaf(model.dec_b[i]);
        h = tape.conv_transpose1d(h, w, b, l.stride, l.pad);
        if (l.crop_to != 0) h = tape.narrow(h, 0, l.crop_to);
        if (i + 1 < model.plan.decoder.size()) h = tape.leaky_relu(h);
        // final layer keeps the identity activation
    }
    return h;
}

ad::VarId reparameterize_graph(ad::Tape& tape, ad::VarId mu, ad::VarId logvar,
                               const ad::Tensor& eps) {
    ad::VarId half_logvar = tape.scale(logvar, 0.5);
    ad::VarId sigma = tape.exp(half_logvar);
    ad::VarId eps_id = tape.constant(eps);
    return tape.add(mu, tape.mul(sigma, eps_id));
}

ad::VarId kl_sum_graph(ad::Tape& tape, ad::VarId mu, ad::VarId logvar) {
    ad::VarId term = tape.sub(tape.add(tape.square(mu), tape.exp(logvar)), logvar);
    term = tape.add_scalar(term, -1.0);
    return tape.scale(tape.sum(term), 0.5);
}

ElboResult elbo_graph(ad::Tape& tape, VaeModel& model, const ad::Tensor& x_clean,
                      const ad::Tensor& x_noisy, double beta, std::size_t mc_samples,
                      double sigma, Prng& rng) {
    if (x_clean.shape != x_noisy.shape) {
        throw ShapeError("elbo pair: " + ad::shape_str(x_clean.shape) + " vs " +
                         ad::shape_str(x_noisy.shape));
    }
    if (mc_samples < 1) throw InvalidParamsError("mc_samples must be >= 1");
    if (!(sigma > 0.0)) throw InvalidParamsError("likelihood sigma must be > 0");

    ad::Tensor noisy_in = x_noisy;
    noisy_in.requires_grad = false;
    ad::Tensor clean_in = x_clean;
    clean_in.requires_grad = false;

    const std::size_t batch = x_clean.shape[0];
    const double dim = static_cast<double>(model.config.input_dim);

    ad::VarId x_in = tape.constant(std::move(noisy_in));
    ad::VarId x_ref = tape.constant(std::move(clean_in));
    EncodeHeads heads = encode_graph(tape, model, x_in);

    ad::VarId sse_total{};
    for (std::size_t s = 0; s < mc_samples; ++s) {
        ad::Tensor eps = ad::Tensor::zeros(tape.shape(heads.mu));
        for (double& v : eps.data) v = rng.normal();
        ad::VarId z = reparameterize_graph(tape, heads.mu, heads.logvar, eps);
        ad::VarId recon = decode_graph(tape, model, z);
        ad::VarId sse = tape.sum(tape.square(tape.sub(recon, x_ref)));
        sse_total = s == 0 ? sse : tape.add(sse_total, sse);
    }

    // -log p averaged over draws and batch, Gaussian with fixed sigma.
    const double mse_coeff =
        1.0 / (2.0 * sigma * sigma * static_cast<double>(mc_samples) *
               static_cast<double>(batch));
    const double const_term = 0.5 * dim * std::log(2.0 * M_PI * sigma * sigma);
    ad::VarId recon_term = tape.add_scalar(tape.scale(sse_total, mse_coeff), const_term);

    ad::VarId kl_mean =
        tape.scale(kl_sum_graph(tape, heads.mu, heads.logvar), 1.0 / static_cast<double>(batch));
    ad::VarId loss = tape.add(recon_term, tape.scale(kl_mean, beta));

    ElboResult result;
    result.loss = loss;
    result.neg_elbo = tape.scalar_value(loss);
    result.recon_term = tape.scalar_value(recon_term);
    result.kl_term = tape.scalar_value(kl_mean);
    return result;
}

std::pair<ad::Tensor, ad::Tensor> encode(VaeModel& model, const ad::Tensor& x) {
    ad::Tape tape;
    ad::Tensor input = x;
    input.requires_grad = false;
    EncodeHeads heads = encode_graph(tape, model, tape.constant(std::move(input)));
    ad::Tensor mu(tape.shape(heads.mu), tape.value(heads.mu));
    ad::Tensor logvar(tape.shape(heads.logvar), tape.value(heads.logvar));
    return {std::move(mu), std::move(logvar)};
}

ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& logvar, std::uint64_t seed) {
    if (mu.shape != logvar.shape) {
        throw ShapeError("reparameterize: " + ad::shape_str(mu.shape) + " vs " +
                         ad::shape_str(logvar.shape));
    }
    Prng rng(seed);
    ad::Tensor z = ad::Tensor::zeros(mu.shape);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        z.data[i] = mu.data[i] + std::exp(0.5 * logvar.data[i]) * rng.normal();
    }
    return z;
}

std::vector<double> kl_divergence(const ad::Tensor& mu, const ad::Tensor& logvar) {
    if (mu.shape != logvar.shape || mu.shape.size() != 2) {
        throw ShapeError("kl_divergence expects matching [B,D]: " + ad::shape_str(mu.shape) +
                         " vs " + ad::shape_str(logvar.shape));
    }
    const std::size_t batch = mu.shape[0];
    const std::size_t dim = mu.shape[1];
    std::vector<double> out(batch, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double m = mu.data[b * dim + d];
            const double lv = logvar.data[b * dim + d];
            acc += m * m + std::exp(lv) - lv - 1.0;
        }
        out[b] = 0.5 * acc;
    }
    return out;
}

ad::Tensor decode(VaeModel& model, const ad::Tensor& z) {
    ad::Tape tape;
    ad::Tensor input = z;
    input.requires_grad = false;
    ad::VarId out = decode_graph(tape, model, tape.constant(std::move(input)));
    return ad::Tensor(tape.shape(out), tape.value(out));
}

double elbo_loss(VaeModel& model, const ad::Tensor& x_clean, const ad::Tensor& x_noisy,
                 double beta, std::size_t mc_samples, double sigma, std::uint64_t seed) {
    ad::Tape tape;
    Prng rng(seed);
    return elbo_graph(tape, model, x_clean, x_noisy, beta, mc_samples, sigma, rng).neg_elbo;
}

namespace {

ad::Tensor beats_to_tensor(const std::vector<const Beat*>& beats, std::size_t input_dim) {
    ad::Tensor t = ad::Tensor::zeros({beats.size(), 1, input_dim});
    for (std::size_t i = 0; i < beats.size(); ++i) {
        if (beats[i]->samples.size() != input_dim) {
            throw ShapeError("beat " + beats[i]->beat_id + " has length " +
                             std::to_string(beats[i]->samples.size()) + ", model expects " +
                             std::to_string(input_dim));
        }
        std::copy(beats[i]->samples.begin(), beats[i]->samples.end(),
                  t.data.begin() + static_cast<std::ptrdiff_t>(i * input_dim));
    }
    return t;
}

} // namespace

std::vector<Beat> denoise_batch(VaeModel& model, const std::vector<Beat>& noisy) {
    std::vector<Beat> out;
    out.reserve(noisy.size());
    const std::size_t dim = model.config.input_dim;
    const std::size_t chunk = std::max<std::size_t>(1, model.config.batch_size);
    for (std::size_t base = 0; base < noisy.size(); base += chunk) {
        const std::size_t n = std::min(chunk, noisy.size() - base);
        std::vector<const Beat*> window(n);
        for (std::size_t i = 0; i < n; ++i) window[i] = &noisy[base + i];

        ad::Tape tape;
        ad::VarId x = tape.constant(beats_to_tensor(window, dim));
        EncodeHeads heads = encode_graph(tape, model, x);
        ad::VarId recon = decode_graph(tape, model, heads.mu);
        const std::vector<double>& values = tape.value(recon);
        for (std::size_t i = 0; i < n; ++i) {
            Beat b = noisy[base + i];
            for (std::size_t s = 0; s < dim; ++s) {
                b.samples[s] = std::clamp(values[i * dim + s], 0.0, 1.0);
            }
            out.push_back(std::move(b));
        }
    }
    return out;
}

Beat denoise(VaeModel& model, const Beat& noisy) {
    return denoise_batch(model, {noisy}).front();
}

namespace {

struct PairBatch {
    ad::Tensor clean;
    ad::Tensor noisy;
    std::size_t n = 0;
};

PairBatch gather_batch(const Dataset& ds, const std::vector<PairedIndex>& pairs,
                       const std::vector<std::size_t>& order, std::size_t begin,
                       std::size_t end, std::size_t input_dim) {
    std::vector<const Beat*> clean_beats, noisy_beats;
    for (std::size_t i = begin; i < end; ++i) {
        const PairedIndex& p = pairs[order[i]];
        clean_beats.push_back(&ds.records()[p.clean].beat);
        noisy_beats.push_back(&ds.records()[p.noisy].beat);
    }
    PairBatch batch;
    batch.clean = beats_to_tensor(clean_beats, input_dim);
    batch.noisy = beats_to_tensor(noisy_beats, input_dim);
    batch.n = clean_beats.size();
    return batch;
}

struct SplitPairs {
    std::vector<PairedIndex> train;
    std::vector<PairedIndex> test;
};

SplitPairs split_pairs(const Dataset& ds) {
    SplitPairs sp;
    for (const PairedIndex& p : ds.pairs()) {
        (ds.records()[p.clean].split == Split::train ? sp.train : sp.test).push_back(p);
    }
    return sp;
}

struct EvalStats {
    double neg_elbo = 0, recon = 0, kl = 0;
};

EvalStats evaluate_split(VaeModel& model, const Dataset& ds,
                         const std::vector<PairedIndex>& pairs, std::uint64_t eval_seed) {
    const VaeConfig& cfg = model.config;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    EvalStats stats;
    double total = 0;
    Prng rng(eval_seed);
    for (std::size_t base = 0; base < pairs.size(); base += cfg.batch_size) {
        const std::size_t end = std::min(pairs.size(), base + cfg.batch_size);
        PairBatch batch = gather_batch(ds, pairs, order, base, end, cfg.input_dim);
        ad::Tape tape;
        ElboResult r = elbo_graph(tape, model, batch.clean, batch.noisy, cfg.beta,
                                  cfg.mc_samples, cfg.likelihood_sigma, rng);
        const auto w = static_cast<double>(batch.n);
        stats.neg_elbo += r.neg_elbo * w;
        stats.recon += r.recon_term * w;
        stats.kl += r.kl_term * w;
        total += w;
    }
    stats.neg_elbo /= total;
    stats.recon /= total;
    stats.kl /= total;
    return stats;
}

std::vector<std::vector<double>> snapshot_params(const VaeModel& model) {
    std::vector<std::vector<double>> snap;
    for (const ad::Tensor* t : model.parameters()) snap.push_back(t->data);
    return snap;
}

void restore_params(VaeModel& model, const std::vector<std::vector<double>>& snap) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->data = snap[i];
}

} // namespace

TrainingReport train(VaeModel& model, const Dataset& paired, const EpochCallback& on_epoch) {
    const VaeConfig& cfg = model.config;
    cfg.validate();
    SplitPairs sp = split_pairs(paired);
    if (sp.train.empty()) {
        throw InsufficientDataError("train split has no clean/noisy pairs");
    }

    TrainingReport report;
    ad::AdamState opt_state;
    ad::AdamConfig opt_cfg;
    opt_cfg.lr = cfg.lr;

    std::vector<std::size_t> order(sp.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params = snapshot_params(model);
    std::size_t collapse_streak = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Prng shuffle_rng(rng::mix(cfg.seed, 0xE90C000ULL + epoch));
        shuffle_rng.shuffle(order);
        Prng noise_rng(rng::mix(cfg.seed, 0x5A321000ULL + epoch));

        double ep_loss = 0, ep_recon = 0, ep_kl = 0, ep_n = 0;
        for (std::size_t base = 0; base < sp.train.size(); base += cfg.batch_size) {
            const std::size_t end = std::min(sp.train.size(), base + cfg.batch_size);
            PairBatch batch = gather_batch(paired, sp.train, order, base, end, cfg.input_dim);

            ad::Tape tape;
            ElboResult r = elbo_graph(tape, model, batch.clean, batch.noisy, cfg.beta,
                                      cfg.mc_samples, cfg.likelihood_sigma, noise_rng);
            model.zero_grad();
            tape.backward(r.loss);
            adam_step(model.parameters(), opt_state, opt_cfg);
            report.optimizer_steps += 1;

            const auto w = static_cast<double>(batch.n);
            ep_loss += r.neg_elbo * w;
            ep_recon += r.recon_term * w;
            ep_kl += r.kl_term * w;
            ep_n += w;
        }
        report.logs.push_back(
            {epoch, "train", ep_loss / ep_n, ep_recon / ep_n, ep_kl / ep_n});
        if (on_epoch) on_epoch(report.logs.back());

        if (ep_kl / ep_n < 1e-3) {
            if (++collapse_streak >= 5) report.posterior_collapse = true;
        } else {
            collapse_streak = 0;
        }

        if (!sp.test.empty()) {
            EvalStats ev =
                evaluate_split(model, paired, sp.test, rng::mix(cfg.seed, 0xEBA10000ULL + epoch));
            report.logs.push_back({epoch, "test", ev.neg_elbo, ev.recon, ev.kl});
            if (on_epoch) on_epoch(report.logs.back());
            if (ev.neg_elbo < best) {
                best = ev.neg_elbo;
                best_params = snapshot_params(model);
                report.best_epoch = epoch;
            }
        } else {
            if (ep_loss / ep_n < best) {
                best = ep_loss / ep_n;
                best_params = snapshot_params(model);
                report.best_epoch = epoch;
            }
        }
    }
    restore_params(model, best_params);
    report.best_test_neg_elbo = best;
    return report;
}

void write_train_log(const TrainingReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::data, "cannot open '" + path + "' for writing");
    }
    out << "epoch,split,neg_elbo,recon_term,kl_term\n";
    char buf[64];
    for (const EpochLog& log : report.logs) {
        out << log.epoch << ',' << log.split;
        for (double v : {log.neg_elbo, log.recon_term, log.kl_term}) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw CheckpointError("truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

} // namespace

void save_checkpoint(const VaeModel& model, const std::string& path,
                     const std::string& pipeline_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw CheckpointError("cannot open '" + path + "' for writing");
    }
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);

    nlohmann::json header;
    header["config"] = model.config.to_json();
    header["pipeline_hash"] = pipeline_hash;
    const std::string header_text = header.dump();
    write_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    const auto params = model.parameters();
    write_u64(out, params.size());
    for (const ad::Tensor* t : params) {
        write_u64(out, t->data.size());
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) {
        throw CheckpointError("write failed for '" + path + "'");
    }
}

std::pair<VaeModel, std::string> load_checkpoint(const std::string& path,
                                                 const VaeConfig* expected_config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open '" + path + "'");
    }
    char magic[sizeof(kCheckpointMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CheckpointError("bad magic in '" + path + "'");
    }
    const std::uint64_t header_len = read_u64(in);
    if (header_len > (1ULL << 20)) {
        throw CheckpointError("implausible header length");
    }
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CheckpointError("truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt header: " + std::string(e.what()));
    }
    VaeConfig config = VaeConfig::from_json(header.at("config"));
    const std::string pipeline_hash = header.value("pipeline_hash", "");
    if (expected_config != nullptr && !(config == *expected_config)) {
        throw CheckpointError("checkpoint config does not match the requested config");
    }

    VaeModel model = VaeModel::init(config);
    auto params = model.parameters();
    const std::uint64_t n_params = read_u64(in);
    if (n_params != params.size()) {
        throw CheckpointError("parameter count mismatch");
    }
    for (ad::Tensor* t : params) {
        const std::uint64_t n = read_u64(in);
        if (n != t->data.size()) {
            throw CheckpointError("parameter size mismatch");
        }
        in.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw CheckpointError("truncated parameters");
    }
    for (const ad::Tensor* t : params) t->validate("checkpoint");
    return {std::move(model), pipeline_hash};
}

} // namespace mapden
