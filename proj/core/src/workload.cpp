#include "lorasim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lorasim {

double Rng::exponential(double rate) {
  if (rate <= 0.0) throw std::invalid_argument("Rng::exponential: rate must be > 0");
  return -std::log1p(-uniform01()) / rate;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be > 0");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
  return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::size_t Rng::discrete(const std::vector<double>& cumulative, double total) {
  const double u = uniform01() * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) return cumulative.size() - 1;
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream); avalanche keeps streams apart.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

const std::vector<LengthRow>& builtin_length_table() {
  static const std::vector<LengthRow> table = {
      {16, 8, 6},    {32, 24, 10},  {48, 44, 14},  {64, 60, 18},
      {96, 88, 22},  {128, 104, 24}, {160, 120, 18}, {192, 136, 14},
      {224, 168, 10}, {288, 200, 6}, {384, 264, 3}, {512, 328, 1},
  };
  return table;
}

std::vector<LengthRow> parse_length_table(const std::string& text) {
  std::vector<LengthRow> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);
    if (body == "prompt_len,output_len,weight") continue;  // optional header
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream fields(body);
    LengthRow row;
    if (!(fields >> row.prompt_len >> row.output_len >> row.weight)) {
      throw std::invalid_argument("length table line " + std::to_string(lineno) +
                                  ": expected prompt_len,output_len,weight");
    }
    std::string extra;
    if (fields >> extra) {
      throw std::invalid_argument("length table line " + std::to_string(lineno) +
                                  ": trailing fields");
    }
    if (row.prompt_len < 1 || row.output_len < 1 || row.weight <= 0.0) {
      throw std::invalid_argument("length table line " + std::to_string(lineno) +
                                  ": lengths must be >= 1 and weight > 0");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw std::invalid_argument("length table: no rows");
  return rows;
}

int model_count_for(int n, Popularity popularity) {
  if (n <= 0) return 0;
  switch (popularity) {
    case Popularity::Distinct:
      return n;
    case Popularity::Identical:
      return 1;
    case Popularity::Uniform:
    case Popularity::Skewed:
      return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  }
  return 0;
}

std::vector<std::int64_t> assign_models(int n, Popularity popularity, double alpha,
                                        std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("assign_models: negative request count");
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  Rng rng(seed);
  switch (popularity) {
    case Popularity::Distinct:
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
      break;
    case Popularity::Identical:
      break;  // all zero
    case Popularity::Uniform: {
      const int m = model_count_for(n, popularity);
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i % m;
      rng.shuffle(out);
      break;
    }
    case Popularity::Skewed: {
      if (alpha <= 1.0) throw std::invalid_argument("assign_models: Skewed needs alpha > 1");
      const int m = model_count_for(n, popularity);
      // Popularity of adjacent ranks differs by exactly alpha.
      std::vector<double> cumulative(static_cast<std::size_t>(m));
      double total = 0.0;
      double w = 1.0;
      for (int i = 0; i < m; ++i) {
        total += w;
        cumulative[static_cast<std::size_t>(i)] = total;
        w /= alpha;
      }
      for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            static_cast<std::int64_t>(rng.discrete(cumulative, total));
      break;
    }
  }
  return out;
}

namespace {

double ramp_rate(const ArrivalSpec& a, double t) {
  if (t < 0.0) return 0.0;
  if (t < a.ramp_up_s) return a.peak_rate * (t / a.ramp_up_s);
  if (t < a.ramp_up_s + a.hold_s) return a.peak_rate;
  const double into_down = t - a.ramp_up_s - a.hold_s;
  if (into_down < a.ramp_down_s) return a.peak_rate * (1.0 - into_down / a.ramp_down_s);
  return 0.0;
}

}  // namespace

std::vector<double> sample_arrivals(const WorkloadSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  const ArrivalSpec& a = spec.arrival;
  switch (a.kind) {
    case ArrivalKind::Poisson:
    case ArrivalKind::Burst: {
      const double rate = (a.kind == ArrivalKind::Burst) ? 1e9 : a.rate;
      if (rate <= 0.0) throw std::invalid_argument("sample_arrivals: rate must be > 0");
      if (spec.num_requests <= 0)
        throw std::invalid_argument("sample_arrivals: num_requests must be > 0");
      out.reserve(static_cast<std::size_t>(spec.num_requests));
      double t = 0.0;
      for (int i = 0; i < spec.num_requests; ++i) {
        t += rng.exponential(rate);
        out.push_back(t);
      }
      break;
    }
    case ArrivalKind::Ramp: {
      if (a.peak_rate <= 0.0) throw std::invalid_argument("sample_arrivals: peak_rate must be > 0");
      if (a.ramp_up_s <= 0.0 || a.ramp_down_s <= 0.0)
        throw std::invalid_argument("sample_arrivals: ramp durations must be > 0");
      const double horizon = a.ramp_up_s + a.hold_s + a.ramp_down_s;
      double t = 0.0;
      while (true) {
        t += rng.exponential(a.peak_rate);
        if (t >= horizon) break;
        if (rng.uniform01() * a.peak_rate < ramp_rate(a, t)) {
          out.push_back(t);
          if (spec.num_requests > 0 &&
              out.size() == static_cast<std::size_t>(spec.num_requests))
            break;
        }
      }
      break;
    }
  }
  return out;
}

void sample_lengths(const WorkloadSpec& spec, std::uint64_t seed, std::size_t n,
                    std::vector<int>& prompt_out, std::vector<int>& output_out) {
  if (spec.lengths.empty()) throw std::invalid_argument("sample_lengths: empty length table");
  Rng rng(seed);
  std::vector<double> cumulative(spec.lengths.size());
  double total = 0.0;
  for (std::size_t i = 0; i < spec.lengths.size(); ++i) {
    if (spec.lengths[i].weight <= 0.0)
      throw std::invalid_argument("sample_lengths: weights must be > 0");
    total += spec.lengths[i].weight;
    cumulative[i] = total;
  }
  prompt_out.resize(n);
  output_out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LengthRow& row = spec.lengths[rng.discrete(cumulative, total)];
    prompt_out[i] = row.prompt_len;
    output_out[i] = row.output_len;
  }
}

GeneratedWorkload generate(const WorkloadSpec& spec) {
  GeneratedWorkload g;
  g.arrival = sample_arrivals(spec, derive_seed(spec.seed, 1));
  const int n = static_cast<int>(g.arrival.size());
  g.lora = assign_models(n, spec.popularity, spec.alpha, derive_seed(spec.seed, 2));
  sample_lengths(spec, derive_seed(spec.seed, 3), g.arrival.size(), g.prompt_len, g.output_len);
  g.model_count = model_count_for(n, spec.popularity);
  return g;
}

const char* to_string(Popularity p) {
  switch (p) {
    case Popularity::Distinct:
      return "distinct";
    case Popularity::Uniform:
      return "uniform";
    case Popularity::Skewed:
      return "skewed";
    case Popularity::Identical:
      return "identical";
  }
  return "?";
}

}  // namespace lorasim
