#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "topm/evacuation.hpp"
#include "topm/problems.hpp"

using namespace topm;

TEST_CASE("experiment registry matches the published settings") {
  const auto e1 = make_experiment(ExperimentId::E1);
  CHECK(e1.k == 20);
  CHECK(e1.m == 5);
  CHECK(e1.n0 == 10);
  CHECK(e1.budget == 5000);
  CHECK(e1.k * e1.n0 == 200);

  const auto e2 = make_experiment(ExperimentId::E2);
  CHECK(e2.noise_sd[0] == doctest::Approx(50.0));
  CHECK(e2.mean_sd[0] == doctest::Approx(50.0 / std::sqrt(10.0)));

  const auto e3 = make_experiment(ExperimentId::E3);
  CHECK(e3.k == 50);
  CHECK(e3.m == 15);
  CHECK(e3.budget == 12000);
  CHECK(e3.noise_sd[48] * e3.noise_sd[48] == doctest::Approx(2401.0));

  const auto e4 = make_experiment(ExperimentId::E4);
  CHECK(e4.k == 100);
  CHECK(e4.budget == 200000);

  const auto a01 = make_experiment(ExperimentId::A01);
  CHECK(a01.k == 10);
  CHECK(a01.m == 3);
  CHECK(a01.n0 == 20);
  CHECK(a01.budget == 8000);
  const auto mu = a01.draw_means(1, 0);
  for (int i = 0; i < 10; ++i) CHECK(mu[i] == doctest::Approx(i + 1.0));
  for (double s : a01.noise_sd) CHECK(s == doctest::Approx(6.0));

  const auto a02 = make_experiment(ExperimentId::A02);
  CHECK(a02.budget == 7000);
  CHECK(a02.noise_sd[9] == doctest::Approx(10.0));

  const auto a03 = make_experiment(ExperimentId::A03);
  CHECK(a03.k == 20);
  CHECK(a03.n0 == 20);
}

TEST_CASE("drawn means are reproducible and macro-dependent") {
  const auto e1 = make_experiment(ExperimentId::E1);
  const auto a = e1.draw_means(99, 7);
  const auto b = e1.draw_means(99, 7);
  const auto c = e1.draw_means(99, 8);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("synthetic observation streams are reproducible") {
  SyntheticSource src({1.0, 2.0}, {0.5, 0.5}, 123, 4);
  const double x = src.observe(0, 10);
  CHECK(src.observe(0, 10) == x);
  SyntheticSource again({1.0, 2.0}, {0.5, 0.5}, 123, 4);
  CHECK(again.observe(0, 10) == x);
}

TEST_CASE("lognormal parameter conversion") {
  const auto p = lognormal_params(20.0, 1.0);
  CHECK(p.mu_log == doctest::Approx(2.994484).epsilon(1e-6));
  CHECK(p.var_log == doctest::Approx(0.0024969).epsilon(1e-4));

  const auto tiny = lognormal_params(1.0, 1e-12);
  CHECK(std::fabs(tiny.mu_log) <= 1e-9);
  CHECK(tiny.var_log <= 1e-9);

  CHECK_THROWS_AS(lognormal_params(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(lognormal_params(1.0, 0.0), DomainError);
}

TEST_CASE("lognormal draws reproduce the requested moments") {
  const auto p = lognormal_params(20.0, 4.0);
  rng::Sequence seq(rng::derive_key(2, rng::kTagTest));
  double sum = 0, sumsq = 0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) {
    const double x = seq.lognormal(p.mu_log, std::sqrt(p.var_log));
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean - 20.0) / 20.0 <= 0.005);
  CHECK(std::fabs(var - 4.0) / 4.0 <= 0.05);
}

TEST_CASE("builtin network structure") {
  const auto& net = builtin_network();
  CHECK(net.nodes.size() == 22);
  CHECK(net.edges.size() == 33);
  CHECK(net.sources.size() == 4);
  CHECK(net.sources[0].population == 250);
  CHECK(net.sources[1].population == 350);
  CHECK(net.sources[2].population == 305);
  CHECK(net.sources[3].population == 180);
  CHECK(net.paths.size() == 12);
  for (const auto& by_source : net.paths_by_source)
    CHECK(by_source.size() == 3);
}

TEST_CASE("builtin paths reproduce the published flow/time table") {
  const auto& net = builtin_network();
  // deterministic attributes at the edge means
  SampledAttributes attrs;
  for (const auto& e : net.edges) {
    attrs.capacity.push_back(e.mean_capacity);
    attrs.time.push_back(e.mean_time);
  }
  const double expect_flow[12] = {20, 10, 20, 20, 10, 20, 20, 10, 20, 20, 10, 20};
  const double expect_time[12] = {6, 9, 12, 9, 11, 12, 8, 10, 11, 8, 9, 10};
  for (int p = 0; p < 12; ++p) {
    const auto m = path_metrics(net, p, attrs);
    CHECK(m.flow == doctest::Approx(expect_flow[p]));
    CHECK(m.travel_time == doctest::Approx(expect_time[p]));
  }
}

TEST_CASE("network validation rejects malformed input") {
  auto json = builtin_network_json();
  CHECK_NOTHROW(load_network(json));

  // unknown edge in a path
  auto broken = json;
  const auto pos = broken.find("[1, 7, 12, 20]");
  REQUIRE(pos != std::string::npos);
  broken.replace(pos, 14, "[1, 19, 12, 20]");
  CHECK_THROWS_AS(load_network(broken), ValidationError);

  CHECK_THROWS_AS(load_network("{"), ValidationError);
  CHECK_THROWS_AS(load_network("{}"), ValidationError);
}

TEST_CASE("path metrics") {
  EvacuationNetwork net;
  net.nodes = {{1, EvacuationNetwork::NodeKind::Source},
               {2, EvacuationNetwork::NodeKind::Intermediate},
               {3, EvacuationNetwork::NodeKind::Intermediate},
               {4, EvacuationNetwork::NodeKind::Destination}};
  net.edges = {{1, 2, 20, 1, 2, 0.01},
               {2, 3, 10, 1, 3, 0.01},
               {3, 4, 30, 1, 1, 0.01}};
  net.sources = {{1, 100}};
  net.paths = {{1, {1, 2, 3, 4}, {}}};
  net.validate();

  SampledAttributes attrs{{20, 10, 30}, {2, 3, 1}};
  const auto m = path_metrics(net, 0, attrs);
  CHECK(m.travel_time == doctest::Approx(6.0));
  CHECK(m.flow == doctest::Approx(10.0));

  // single-edge path passes its attributes through
  net.paths.push_back({1, {1, 2}, {}});
  CHECK_THROWS_AS(net.validate(), ValidationError);  // 2 is not a destination
  net.paths.back() = {1, {1}, {}};
  CHECK_THROWS_AS(net.validate(), ValidationError);  // degenerate path
  net.paths.pop_back();
  net.validate();
}

TEST_CASE("source evacuation time formula") {
  CHECK(source_evac_time(250, {{6, 20}, {9, 10}}) == 15);
  CHECK(source_evac_time(0, {{5, 10}}) == 4);
  CHECK(source_evac_time(30, {{1, 30}}) == 1);
  CHECK_THROWS_AS(source_evac_time(10, {}), ZeroFlow);
}

TEST_CASE("plan enumeration") {
  const auto plans = enumerate_plans(builtin_network());
  CHECK(plans.size() == 81);
  // deterministic lexicographic ordering by per-source pair index
  CHECK(plans[0].choice[0] == std::vector<int>{0, 1});
  CHECK(plans[0].choice[3] == std::vector<int>{0, 1});
  CHECK(plans[1].choice[3] == std::vector<int>{0, 2});
  CHECK(plans[80].choice[0] == std::vector<int>{1, 2});
  const auto again = enumerate_plans(builtin_network());
  for (int i = 0; i < 81; ++i) CHECK(plans[i].choice == again[i].choice);

  EvacuationNetwork single;
  single.nodes = {{1, EvacuationNetwork::NodeKind::Source},
                  {2, EvacuationNetwork::NodeKind::Destination}};
  single.edges = {{1, 2, 10, 1, 2, 0.01}};
  single.sources = {{1, 50}};
  single.paths = {{1, {1, 2}, {}}, {1, {1, 2}, {}}};
  single.validate();
  CHECK(enumerate_plans(single).size() == 1);
}

namespace {

// Two sources funneling into one shared edge:
//
//   1 --(c20, t0.9)--> 3 --(cC, t0.9)--> 4
//   2 --(c15, t1.9)--> 3
//
// Populations (42, 25). With attributes pinned at the means:
//   source 1: T = 1.8, F = 20, waves (20, 20, 2) at u = 0,1,2; the
//             priority key is ceil(42/20 + 0.8) = 3.
//   source 2: T = 2.8, F = 15, waves (15, 10) at u = 0,1; priority key
//             ceil(25/15 + 1.8) = 4, so source 2 enters shared edges first.
// Off-integer travel times and populations keep every ceil and wave count
// stable under the tiny sampling jitter.
EvacuationNetwork toy_network(double shared_capacity) {
  EvacuationNetwork net;
  net.nodes = {{1, EvacuationNetwork::NodeKind::Source},
               {2, EvacuationNetwork::NodeKind::Source},
               {3, EvacuationNetwork::NodeKind::Intermediate},
               {4, EvacuationNetwork::NodeKind::Destination}};
  net.edges = {{1, 3, 20, 1e-9, 0.9, 1e-9},
               {2, 3, 15, 1e-9, 1.9, 1e-9},
               {3, 4, shared_capacity, 1e-9, 0.9, 1e-9}};
  net.sources = {{1, 42}, {2, 25}};
  net.paths = {{1, {1, 3, 4}, {}}, {2, {2, 3, 4}, {}}};
  net.validate();
  return net;
}

double deterministic_clearance(const EvacuationNetwork& net,
                               const Plan& plan) {
  rng::Sequence seq(rng::derive_key(5, rng::kTagTest));
  return simulate_clearance(net, plan, seq);
}

}  // namespace

TEST_CASE("toy network clearance matches the hand simulation") {
  Plan plan;
  plan.choice = {{0}, {0}};

  // Uncongested shared edge (capacity 35 >= 20 + 15). Hand simulation:
  //   t=0: wave A0=20 enters (1,3), B0=15 enters (2,3)
  //   t=1: A0 -> shared edge, reaches the destination at 2; A1 follows
  //   t=2: B0 (priority) + A1 share the edge, arrive 3; A2=2 reaches node 3
  //   t=3: B1=10 and A2 enter, arrive 4
  // Clearance 4, the larger source completion time.
  CHECK(deterministic_clearance(toy_network(35), plan) == doctest::Approx(4.0));

  // Congested shared edge (capacity 20). Hand simulation:
  //   t=2: B0=15 first, 5 of A1 squeeze in, 15 of A1 wait
  //   t=3: B1=10 first, 10 of A1 follow, ~5 of A1 and A2=2 wait
  //   t=4: the last ~7 enter and reach the destination at 5
  CHECK(deterministic_clearance(toy_network(20), plan) == doctest::Approx(5.0));

  // Doubling every capacity cannot slow the evacuation down.
  auto doubled = toy_network(20);
  for (auto& e : doubled.edges) e.mean_capacity *= 2;
  doubled.validate();
  CHECK(deterministic_clearance(doubled, plan) <=
        deterministic_clearance(toy_network(20), plan));
}

TEST_CASE("single wave clears in exactly the travel time") {
  EvacuationNetwork net;
  net.nodes = {{1, EvacuationNetwork::NodeKind::Source},
               {2, EvacuationNetwork::NodeKind::Destination}};
  net.edges = {{1, 2, 31, 1e-9, 3.9, 1e-9}};
  net.sources = {{1, 30}};
  net.paths = {{1, {1, 2}, {}}, {1, {1, 2}, {}}};
  net.validate();
  Plan plan;
  plan.choice = {{0}};
  rng::Sequence seq(rng::derive_key(6, rng::kTagTest));
  CHECK(simulate_clearance(net, plan, seq) == doctest::Approx(4.0));
}

TEST_CASE("clearance never beats the fastest path") {
  const auto& net = builtin_network();
  const auto plans = enumerate_plans(net);
  rng::Sequence seq(rng::derive_key(8, rng::kTagTest));
  for (int rep = 0; rep < 50; ++rep) {
    const auto& plan = plans[seq.below(plans.size())];
    rng::Sequence sim(rng::derive_key(9, rng::kTagTest, rep));
    rng::Sequence attrs_seq(rng::derive_key(9, rng::kTagTest, rep));
    const auto attrs = sample_attributes(net, attrs_seq);
    const double clearance = simulate_clearance(net, plan, sim);
    double bound = 0.0;
    for (std::size_t s = 0; s < net.sources.size(); ++s) {
      double fastest = std::numeric_limits<double>::infinity();
      for (int c : plan.choice[s]) {
        const int pi = net.paths_by_source[s][c];
        fastest = std::min(fastest, path_metrics(net, pi, attrs).travel_time);
      }
      bound = std::max(bound, fastest);
    }
    CHECK(clearance >= std::floor(bound));
  }
}

TEST_CASE("clearance estimates are deterministic and sane") {
  const auto& net = builtin_network();
  const auto plans = enumerate_plans(net);
  const auto a = estimate_clearance(net, plans, 40, 77, 2);
  const auto b = estimate_clearance(net, plans, 40, 77, 1);
  REQUIRE(a.size() == 81);
  for (int i = 0; i < 81; ++i) {
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].mean > 0.0);
    CHECK(std::isfinite(a[i].mean));
  }
}
