#include <benchmark/benchmark.h>

#include <random>

#include "momentopf/network.hpp"
#include "momentopf/opf_polynomials.hpp"
#include "momentopf/polynomial.hpp"
#include "momentopf/relaxation.hpp"
#include "momentopf/sparsity.hpp"

namespace {

// Ring of n buses with a chord every 5 buses; one generator, spread load.
mopf::NetworkCase ring_case(int n) {
  mopf::NetworkCase nc;
  nc.name = "ring" + std::to_string(n);
  nc.base_mva = 100;
  nc.reference_bus = 1;
  for (int i = 1; i <= n; ++i) {
    mopf::BusRecord b;
    b.id = i;
    b.P_D = i == 1 ? 0 : 10;
    b.Q_D = i == 1 ? 0 : 3;
    b.V_min = 0.94;
    b.V_max = 1.06;
    nc.buses.push_back(b);
  }
  mopf::GeneratorRecord g;
  g.bus_id = 1;
  g.P_min = 0;
  g.P_max = 20.0 * n;
  g.Q_min = -10.0 * n;
  g.Q_max = 10.0 * n;
  g.cost = {0.01, 20, 0};
  nc.generators.push_back(g);
  auto link = [&](int a, int b) {
    mopf::BranchRecord br;
    br.from_bus = a;
    br.to_bus = b;
    br.R = 0.02;
    br.X = 0.08;
    br.b_sh = 0.01;
    nc.branches.push_back(br);
  };
  for (int i = 1; i <= n; ++i) link(i, i % n + 1);
  for (int i = 1; i + 5 <= n; i += 5) link(i, i + 5);
  return nc;
}

void BM_MonomialBasis(benchmark::State& state) {
  std::vector<mopf::VarId> vars(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < vars.size(); ++i) vars[i] = static_cast<mopf::VarId>(i);
  for (auto _ : state) benchmark::DoNotOptimize(mopf::monomial_basis(vars, 2));
}
BENCHMARK(BM_MonomialBasis)->Arg(6)->Arg(12)->Arg(24);

void BM_PolynomialMultiply(benchmark::State& state) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> coef(-1, 1);
  const int n = static_cast<int>(state.range(0));
  mopf::Polynomial a, b;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      a.add_term(mopf::Exponent::variable(i) + mopf::Exponent::variable(j), coef(rng));
      b.add_term(mopf::Exponent::variable(i) + mopf::Exponent::variable(j), coef(rng));
    }
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_PolynomialMultiply)->Arg(4)->Arg(8);

void BM_AdmittanceAssembly(benchmark::State& state) {
  const mopf::NetworkCase nc = ring_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mopf::build_admittance(nc));
}
BENCHMARK(BM_AdmittanceAssembly)->Arg(30)->Arg(300);

void BM_ChordalCliques(benchmark::State& state) {
  const mopf::NetworkCase nc = ring_case(static_cast<int>(state.range(0)));
  const mopf::Graph g = mopf::network_graph(nc);
  for (auto _ : state) {
    auto ext = mopf::chordal_extension(g);
    benchmark::DoNotOptimize(mopf::maximal_cliques(ext));
  }
}
BENCHMARK(BM_ChordalCliques)->Arg(30)->Arg(300);

void BM_RelaxationBuild(benchmark::State& state) {
  const mopf::NetworkCase nc = ring_case(static_cast<int>(state.range(0)));
  const mopf::CliqueSet cs = mopf::maximal_cliques(mopf::chordal_extension(mopf::network_graph(nc)));
  const mopf::OrderAssignment orders;
  for (auto _ : state)
    benchmark::DoNotOptimize(mopf::build_relaxation(nc, cs, orders, {0.0}));
}
BENCHMARK(BM_RelaxationBuild)->Arg(9)->Arg(30)->Arg(118);

}  // namespace

BENCHMARK_MAIN();
