#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lorasim {

// Deterministic sampling helpers on top of mt19937_64. The engine's output
// sequence is pinned by the standard; the distributions here are hand-rolled
// because the std:: distribution objects are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double exponential(double rate);

  // Uniform integer in [0, n), rejection-sampled so every n is exact.
  std::uint64_t uniform_index(std::uint64_t n);

  int uniform_int(int lo, int hi);  // inclusive bounds

  // Index draw proportional to weights (all > 0).
  std::size_t discrete(const std::vector<double>& cumulative, double total);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Stable stream splitting: derived seeds for independent sampling stages.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class Popularity { Distinct, Uniform, Skewed, Identical };

enum class ArrivalKind { Poisson, Burst, Ramp };

struct ArrivalSpec {
  ArrivalKind kind = ArrivalKind::Poisson;
  double rate = 1.0;        // req/s, Poisson only
  double peak_rate = 1.0;   // req/s at the top of the ramp
  double ramp_up_s = 0.0;
  double hold_s = 0.0;
  double ramp_down_s = 0.0;
};

// One row of the empirical length table: requests draw (prompt_len,
// output_len) pairs proportionally to weight.
struct LengthRow {
  int prompt_len = 0;
  int output_len = 0;
  double weight = 0.0;
};

struct WorkloadSpec {
  int num_requests = 0;  // Ramp: 0 means "as many as the profile produces"
  ArrivalSpec arrival;
  Popularity popularity = Popularity::Distinct;
  double alpha = 1.5;  // Skewed adjacent-popularity ratio, > 1
  std::vector<LengthRow> lengths;
  std::uint64_t seed = 0;
};

struct GeneratedWorkload {
  std::vector<double> arrival;  // ascending
  std::vector<std::int64_t> lora;
  std::vector<int> prompt_len;
  std::vector<int> output_len;
  int model_count = 0;

  std::size_t size() const { return arrival.size(); }
};

// Bundled default (prompt, output, weight) table.
const std::vector<LengthRow>& builtin_length_table();

// CSV rows "prompt_len,output_len,weight"; '#' comments and an optional
// header line are skipped. Throws std::invalid_argument with a line number.
std::vector<LengthRow> parse_length_table(const std::string& text);

// Adapter id per request under the given popularity structure.
// Distinct: one id per request. Uniform: ceil(sqrt(n)) ids, equal share,
// assignment order shuffled by seed. Skewed: ceil(sqrt(n)) ids with adjacent
// popularity ratio alpha. Identical: one id.
std::vector<std::int64_t> assign_models(int n, Popularity popularity, double alpha,
                                        std::uint64_t seed);

int model_count_for(int n, Popularity popularity);

// Arrival timestamps. Poisson: exponential gaps at `rate`. Burst: the
// rate -> infinity limit, approximated with rate 1e9. Ramp: inhomogeneous
// Poisson by thinning against the trapezoid profile up/hold/down.
std::vector<double> sample_arrivals(const WorkloadSpec& spec, std::uint64_t seed);

// (prompt, output) pairs drawn from the weighted length table.
void sample_lengths(const WorkloadSpec& spec, std::uint64_t seed, std::size_t n,
                    std::vector<int>& prompt_out, std::vector<int>& output_out);

GeneratedWorkload generate(const WorkloadSpec& spec);

const char* to_string(Popularity p);

}  // namespace lorasim
