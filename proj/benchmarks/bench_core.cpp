// Microbenchmarks for the hot paths: scoring, training steps and the
// allocator's price machinery. Inputs come from the simulator so the shapes
// match production traffic.
#include <benchmark/benchmark.h>

#include <vector>

#include "coupon/allocator.hpp"
#include "coupon/iidn.hpp"
#include "coupon/simulator.hpp"
#include "coupon/train.hpp"

namespace {

using namespace coupon;

const sim::Simulator& simulator() {
  static const sim::Simulator sim(sim::PopulationSpec::builtin(), 7);
  return sim;
}

const iidn::IidnModel& model() {
  static const iidn::IidnModel m(iidn::IidnConfig{},
                                 iidn::make_params(iidn::IidnConfig{}, 11));
  return m;
}

std::vector<mckp::ScoredMenu> scored_cohort(std::size_t n) {
  std::vector<mckp::ScoredMenu> menus;
  menus.reserve(n);
  const auto& menu = simulator().spec().menu;
  for (std::size_t i = 0; i < n; ++i) {
    const auto user = simulator().make_user(5'000'000 + static_cast<std::int64_t>(i));
    mckp::ScoredMenu scored;
    scored.user_id = user.user_id;
    for (Money amount : menu) {
      scored.costs.push_back(amount);
      scored.values.push_back(user.truth.p_pay(amount));
      scored.stays.push_back(user.truth.p_stay(amount));
    }
    menus.push_back(std::move(scored));
  }
  return menus;
}

void BM_ScoreMenu(benchmark::State& state) {
  const auto user = simulator().make_user(42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model().score_menu(user.features));
  }
}
BENCHMARK(BM_ScoreMenu);

void BM_ForwardBackward(benchmark::State& state) {
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  const auto data = simulator().make_dataset(batch_size, 1);
  iidn::IidnConfig cfg;
  auto params = iidn::make_params(cfg, 11);
  nn::Gradients grads = nn::Gradients::zeros_like(params);
  for (auto _ : state) {
    grads.clear();
    benchmark::DoNotOptimize(
        iidn::forward_backward(cfg, params, data, &grads));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128);

void BM_EstimateDual(benchmark::State& state) {
  const auto menus = scored_cohort(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mckp::estimate_dual(menus, 40'000 * state.range(0) / 100, 0.8));
  }
}
BENCHMARK(BM_EstimateDual)->Arg(1000)->Arg(5000);

void BM_LpFractional(benchmark::State& state) {
  mckp::AllocationInstance instance;
  instance.users = scored_cohort(static_cast<std::size_t>(state.range(0)));
  instance.budget = 40'000 * state.range(0) / 100;
  instance.gamma = 0.8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mckp::lp_fractional(instance));
  }
}
BENCHMARK(BM_LpFractional)->Arg(1000)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
