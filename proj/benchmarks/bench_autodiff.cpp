#include <benchmark/benchmark.h>

#include "mapden/rng.hpp"
#include "mapden/tape.hpp"
#include "mapden/vae.hpp"

using namespace mapden;

namespace {

ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, bool grad = true) {
    Prng rng(seed);
    ad::Tensor t = ad::Tensor::zeros(std::move(shape), grad);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_Conv1dForward(benchmark::State& state) {
    const auto stride = static_cast<std::size_t>(state.range(0));
    ad::Tensor x = random_tensor({32, 64, 93}, 1);
    ad::Tensor w = random_tensor({64, 64, 5}, 2);
    ad::Tensor b = random_tensor({64}, 3);
    for (auto _ : state) {
        ad::Tape tape;
        benchmark::DoNotOptimize(
            tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), stride, 2));
    }
}
BENCHMARK(BM_Conv1dForward)->Arg(1)->Arg(2);

void BM_Conv1dTrainStep(benchmark::State& state) {
    ad::Tensor x = random_tensor({32, 64, 93}, 1);
    ad::Tensor w = random_tensor({64, 64, 5}, 2);
    ad::Tensor b = random_tensor({64}, 3);
    for (auto _ : state) {
        ad::Tape tape;
        ad::VarId y = tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 2, 2);
        x.zero_grad();
        w.zero_grad();
        b.zero_grad();
        tape.backward(tape.sum(y));
    }
}
BENCHMARK(BM_Conv1dTrainStep);

void BM_ElboStep(benchmark::State& state) {
    VaeConfig cfg;
    VaeModel model = VaeModel::init(cfg);
    ad::Tensor clean = random_tensor({32, 1, 370}, 4, false);
    ad::Tensor noisy = random_tensor({32, 1, 370}, 5, false);
    for (double& v : clean.data) v = 0.5 + 0.4 * v;
    for (double& v : noisy.data) v = 0.5 + 0.4 * v;
    ad::AdamState st;
    Prng rng(6);
    for (auto _ : state) {
        ad::Tape tape;
        ElboResult r = elbo_graph(tape, model, clean, noisy, 1.0, 1, 0.1, rng);
        model.zero_grad();
        tape.backward(r.loss);
        adam_step(model.parameters(), st, {});
    }
}
BENCHMARK(BM_ElboStep)->Unit(benchmark::kMillisecond);

void BM_DenoiseBatch(benchmark::State& state) {
    VaeConfig cfg;
    VaeModel model = VaeModel::init(cfg);
    Prng rng(7);
    std::vector<Beat> beats(32);
    for (Beat& b : beats) {
        b.samples.resize(kWindowLen);
        for (double& v : b.samples) v = rng.uniform();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(denoise_batch(model, beats));
    }
}
BENCHMARK(BM_DenoiseBatch)->Unit(benchmark::kMillisecond);

} // namespace
