#include "topm/problems.hpp"

#include <cmath>

namespace topm {

void SyntheticSpec::validate() const {
  if (k < 2) throw ValidationError("need at least two alternatives");
  if (m < 1 || m >= k) throw InvalidM(m, k);
  if (n0 < 2) throw ValidationError("n0 must be >= 2");
  if (budget < static_cast<std::uint64_t>(k) * n0)
    throw BudgetTooSmall(budget, static_cast<std::uint64_t>(k) * n0);
  if (static_cast<int>(noise_sd.size()) != k)
    throw ValidationError("noise_sd must have one entry per alternative");
  for (double s : noise_sd)
    if (!(s > 0.0)) throw ValidationError("sampling std must be positive");
  if (mean_gen == MeanGen::GaussianDraw &&
      static_cast<int>(mean_sd.size()) != k)
    throw ValidationError("mean_sd must have one entry per alternative");
}

std::vector<double> SyntheticSpec::draw_means(std::uint64_t seed,
                                              std::uint64_t macro) const {
  std::vector<double> mu(k);
  if (mean_gen == MeanGen::FixedLinear) {
    for (int i = 0; i < k; ++i) mu[i] = static_cast<double>(i + 1);
    return mu;
  }
  for (int i = 0; i < k; ++i) {
    const std::uint64_t key =
        rng::derive_key(seed, rng::kTagTrueMeans, macro, i);
    mu[i] = mean_sd[i] * rng::normal_at(key, 0);
  }
  return mu;
}

std::optional<ExperimentId> parse_experiment(const std::string& name) {
  if (name == "e1") return ExperimentId::E1;
  if (name == "e2") return ExperimentId::E2;
  if (name == "e3") return ExperimentId::E3;
  if (name == "e4") return ExperimentId::E4;
  if (name == "a01") return ExperimentId::A01;
  if (name == "a02") return ExperimentId::A02;
  if (name == "a03") return ExperimentId::A03;
  return std::nullopt;
}

const char* to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::E1:
      return "e1";
    case ExperimentId::E2:
      return "e2";
    case ExperimentId::E3:
      return "e3";
    case ExperimentId::E4:
      return "e4";
    case ExperimentId::A01:
      return "a01";
    case ExperimentId::A02:
      return "a02";
    case ExperimentId::A03:
      return "a03";
  }
  return "?";
}

SyntheticSpec make_experiment(ExperimentId id) {
  SyntheticSpec s;
  auto fill = [&](auto sd_fn, auto noise_fn) {
    s.mean_sd.resize(s.k);
    s.noise_sd.resize(s.k);
    for (int i = 0; i < s.k; ++i) {
      s.mean_sd[i] = sd_fn(i + 1);
      s.noise_sd[i] = noise_fn(i + 1);
    }
  };
  switch (id) {
    case ExperimentId::E1:
      s.k = 20;
      s.m = 5;
      s.n0 = 10;
      s.budget = 5000;
      s.mean_gen = SyntheticSpec::MeanGen::GaussianDraw;
      fill([](int) { return 1.0; }, [](int) { return 1.0; });
      break;
    case ExperimentId::E2:
      s.k = 50;
      s.m = 15;
      s.n0 = 10;
      s.budget = 12000;
      s.mean_gen = SyntheticSpec::MeanGen::GaussianDraw;
      fill([](int i) { return (51.0 - i) / std::sqrt(10.0); },
           [](int i) { return 51.0 - i; });
      break;
    case ExperimentId::E3:
      s.k = 50;
      s.m = 15;
      s.n0 = 10;
      s.budget = 12000;
      s.mean_gen = SyntheticSpec::MeanGen::GaussianDraw;
      fill([](int i) { return i / 10.0; }, [](int i) { return double(i); });
      break;
    case ExperimentId::E4:
      s.k = 100;
      s.m = 15;
      s.n0 = 10;
      s.budget = 200000;
      s.mean_gen = SyntheticSpec::MeanGen::GaussianDraw;
      fill([](int i) { return i / 10.0; }, [](int i) { return double(i); });
      break;
    case ExperimentId::A01:
      s.k = 10;
      s.m = 3;
      s.n0 = 20;
      s.budget = 8000;
      s.mean_gen = SyntheticSpec::MeanGen::FixedLinear;
      fill([](int) { return 0.0; }, [](int) { return 6.0; });
      break;
    case ExperimentId::A02:
      s.k = 10;
      s.m = 3;
      s.n0 = 20;
      s.budget = 7000;
      s.mean_gen = SyntheticSpec::MeanGen::FixedLinear;
      fill([](int) { return 0.0; }, [](int i) { return double(i); });
      break;
    case ExperimentId::A03:
      s.k = 20;
      s.m = 5;
      s.n0 = 20;
      s.budget = 5000;
      s.mean_gen = SyntheticSpec::MeanGen::GaussianDraw;
      fill([](int) { return 1.0; }, [](int) { return 1.0; });
      break;
  }
  return s;
}

SyntheticSource::SyntheticSource(std::vector<double> means,
                                 std::vector<double> noise_sd,
                                 std::uint64_t seed, std::uint64_t macro)
    : means_(std::move(means)), noise_sd_(std::move(noise_sd)) {
  keys_.resize(means_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i)
    keys_[i] = rng::derive_key(seed, rng::kTagObservation, macro, i);
}

}  // namespace topm
