#include "circa/io.hpp"
#include "circa/models/dense.hpp"
#include "circa/models/gmm.hpp"
#include "circa/models/tree.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/radiomics/case_features.hpp"
#include "circa/rng.hpp"
#include "circa/segmentation/outlier.hpp"
#include "circa/segmentation/trisection.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace circa;

namespace {

void BM_Medcouple(benchmark::State& state) {
    Rng rng(1);
    std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
    for (double& x : xs) x = std::exp(rng.normal());
    for (auto _ : state) benchmark::DoNotOptimize(segmentation::medcouple(xs));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Medcouple)->RangeMultiplier(4)->Range(64, 65536)->Complexity(benchmark::oNLogN);

void BM_CaseRadiomics(benchmark::State& state) {
    Rng rng(2);
    imaging::RasterImage roi(512, 512);
    segmentation::BinaryMask mask(512, 512);
    for (int y = 0; y < 512; ++y)
        for (int x = 0; x < 512; ++x) {
            roi.at(x, y) = std::clamp(0.5 + 0.1 * std::sin(x * 0.07) * std::cos(y * 0.05) + 0.05 * rng.normal(), 0.0, 1.0);
            const bool left = std::hypot((x - 150) / 90.0, (y - 256) / 200.0) < 1.0;
            const bool right = std::hypot((x - 362) / 90.0, (y - 256) / 200.0) < 1.0;
            mask.set(x, y, left || right);
        }
    const auto bands = segmentation::lung_trisection(mask);
    for (auto _ : state) benchmark::DoNotOptimize(radiomics::extract_case_features(roi, bands, 0.05));
}
BENCHMARK(BM_CaseRadiomics)->Unit(benchmark::kMillisecond);

void BM_DenseForwardFullWidth(benchmark::State& state) {
    Rng rng(3);
    const auto params = models::dense_init(200, models::kHiddenWidths, rng);
    std::vector<double> x(200);
    for (double& v : x) v = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(models::dense_forward(params, x));
}
BENCHMARK(BM_DenseForwardFullWidth)->Unit(benchmark::kMicrosecond);

void BM_TreeFit(benchmark::State& state) {
    Rng rng(4);
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<std::vector<double>> x(n, std::vector<double>(6));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : x[i]) v = rng.uniform();
        y[i] = std::clamp(static_cast<int>(3.0 * (x[i][0] + x[i][3]) / 2.0 + 0.2 * rng.normal()), 0, 2);
    }
    models::TreeConfig cfg;
    cfg.class_weights = {0.1, 0.3, 0.9};
    for (auto _ : state) benchmark::DoNotOptimize(models::tree_fit(x, y, cfg));
}
BENCHMARK(BM_TreeFit)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_GmmFit(benchmark::State& state) {
    Rng rng(5);
    std::vector<models::Point2> pts;
    for (const auto& m : {models::Point2{0, 0}, models::Point2{8, 0}, models::Point2{4, 7}})
        for (int i = 0; i < 200; ++i) pts.push_back({m[0] + rng.normal(), m[1] + rng.normal()});
    models::GmmConfig cfg;
    cfg.restarts = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(models::fit_mixture(pts, cfg));
}
BENCHMARK(BM_GmmFit)->Arg(1)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_ProcessFixture(benchmark::State& state) {
    const std::filesystem::path dir = CIRCA_FIXTURE_DIR;
    const pipeline::Engine engine(
        pipeline::load_pipeline_config(dir / "mock.yaml", pipeline::map_environment({})));
    const auto bytes = read_file_bytes(dir / "fixture.png");
    for (auto _ : state) benchmark::DoNotOptimize(engine.process_case(bytes));
}
BENCHMARK(BM_ProcessFixture)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
