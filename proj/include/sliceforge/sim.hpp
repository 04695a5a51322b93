#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "sliceforge/error.hpp"
#include "sliceforge/model.hpp"

namespace sliceforge {

/// Counter-based generator: the k-th draw of stream s is the SplitMix64
/// finalizer applied to key(seed, s) + k * golden gamma. Streams for
/// different (seed, s) are independent for practical purposes and any draw
/// can be reproduced from its coordinates alone.
class CounterRng {
 public:
  static constexpr const char* kName = "splitmix64-counter";

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct SimConfig {
  std::uint64_t seed = 1;
  double horizon = 1e5;
  double warmup = 1e3;
  int batches = 20;
  /// Check occupancy against capacity after every admission.
  bool check_capacity = false;
  /// Batches shorter than this many mean holding times are rejected.
  double min_batch_length = 10.0;
};

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SimResult {
  /// Admitted arrivals per unit time (mean holding time is 1).
  std::vector<Estimate> carried_per_flow;
  std::vector<Estimate> blocking_per_flow;
  /// Whole-run counts including warmup.
  std::vector<std::uint64_t> arrivals;
  std::vector<std::uint64_t> admitted;
  std::vector<std::uint64_t> blocked;
  std::uint64_t events = 0;
  std::string generator = CounterRng::kName;
};

namespace detail {

inline Estimate batch_estimate(const std::vector<double>& values) {
  Estimate e;
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - e.mean) * (v - e.mean);
    const double n = static_cast<double>(values.size());
    e.stderr_ = std::sqrt(sq / (n - 1.0) / n);
  }
  return e;
}

}  // namespace detail

/// Event-driven simulation of the loss network with all-or-nothing
/// admission. Flow r arrives as a Poisson stream of rate nu_r; an arrival is
/// admitted iff every entity j has at least A_jr free units, and then holds
/// them for an exponential(1) time. Estimates are batch means over
/// [warmup, horizon].
inline SimResult simulate(const NetworkModel& model, const CapacityAllocation& alloc,
                          const SimConfig& cfg) {
  const std::size_t m = model.logical_count();
  const std::size_t flows = model.flow_count();
  if (alloc.size() != m) {
    throw DimensionError("simulate: allocation has " + std::to_string(alloc.size()) +
                         " entries, model has " + std::to_string(m));
  }
  std::vector<long long> capacity(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double c = alloc[j];
    if (!(std::isfinite(c) && c >= 0.0 && c == std::floor(c) && c < 9e15)) {
      throw DomainError("simulate: capacity of '" + model.logicals()[j].id +
                        "' must be a non-negative integer");
    }
    if (model.loss_of(j).name() != "erlang_b") {
      throw DomainError("simulate: logical '" + model.logicals()[j].id +
                        "' uses loss '" + std::string(model.loss_of(j).name()) +
                        "'; only erlang_b has a stochastic model");
    }
    capacity[j] = static_cast<long long>(c);
  }
  if (!(std::isfinite(cfg.horizon) && std::isfinite(cfg.warmup) && cfg.warmup >= 0.0 &&
        cfg.horizon > cfg.warmup)) {
    throw DomainError("simulate: need horizon > warmup >= 0");
  }
  if (cfg.batches < 2) throw DomainError("simulate: need at least 2 batches");
  const double batch_len = (cfg.horizon - cfg.warmup) / cfg.batches;
  if (batch_len < cfg.min_batch_length) {
    throw DomainError("simulate: horizon too short for " + std::to_string(cfg.batches) +
                      " batches (batch length " + std::to_string(batch_len) + ")");
  }

  std::vector<CounterRng> arrival_rng, holding_rng;
  for (std::size_t r = 0; r < flows; ++r) {
    arrival_rng.emplace_back(cfg.seed, 2 * r);
    holding_rng.emplace_back(cfg.seed, 2 * r + 1);
  }

  struct Departure {
    double time;
    std::uint64_t seq;
    std::size_t flow;
    bool operator>(const Departure& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };
  std::priority_queue<Departure, std::vector<Departure>, std::greater<>> departures;
  std::uint64_t seq = 0;

  std::vector<double> next_arrival(flows, INFINITY);
  for (std::size_t r = 0; r < flows; ++r) {
    const double nu = model.flows()[r].offered;
    if (nu > 0.0) next_arrival[r] = arrival_rng[r].exponential(nu);
  }

  std::vector<long long> busy(m, 0);
  SimResult result;
  result.arrivals.assign(flows, 0);
  result.admitted.assign(flows, 0);
  result.blocked.assign(flows, 0);
  const auto nb = static_cast<std::size_t>(cfg.batches);
  std::vector<std::vector<std::uint64_t>> batch_arrivals(flows, std::vector<std::uint64_t>(nb, 0));
  std::vector<std::vector<std::uint64_t>> batch_admitted = batch_arrivals;

  for (;;) {
    std::size_t r = flows;
    double t_arr = INFINITY;
    for (std::size_t k = 0; k < flows; ++k) {
      if (next_arrival[k] < t_arr) {
        t_arr = next_arrival[k];
        r = k;
      }
    }
    const double t_dep = departures.empty() ? INFINITY : departures.top().time;
    const double now = std::min(t_arr, t_dep);
    if (!(now < cfg.horizon)) break;
    ++result.events;

    if (t_dep <= t_arr) {
      const std::size_t f = departures.top().flow;
      departures.pop();
      for (std::size_t j = 0; j < m; ++j) busy[j] -= model.demand(j, f);
      continue;
    }

    next_arrival[r] = now + arrival_rng[r].exponential(model.flows()[r].offered);
    ++result.arrivals[r];
    bool fits = true;
    for (std::size_t j = 0; j < m && fits; ++j) {
      fits = busy[j] + model.demand(j, r) <= capacity[j];
    }
    const bool counted = now >= cfg.warmup;
    std::size_t batch = 0;
    if (counted) {
      batch = std::min(nb - 1, static_cast<std::size_t>((now - cfg.warmup) / batch_len));
      ++batch_arrivals[r][batch];
    }
    if (!fits) {
      ++result.blocked[r];
      continue;
    }
    ++result.admitted[r];
    if (counted) ++batch_admitted[r][batch];
    for (std::size_t j = 0; j < m; ++j) busy[j] += model.demand(j, r);
    if (cfg.check_capacity) {
      for (std::size_t j = 0; j < m; ++j) {
        if (busy[j] > capacity[j]) {
          throw Error("simulate: occupancy exceeds capacity on '" +
                      model.logicals()[j].id + "'");
        }
      }
    }
    departures.push({now + holding_rng[r].exponential(1.0), seq++, r});
  }

  result.carried_per_flow.resize(flows);
  result.blocking_per_flow.resize(flows);
  for (std::size_t f = 0; f < flows; ++f) {
    std::vector<double> carried, blocking;
    for (std::size_t b = 0; b < nb; ++b) {
      carried.push_back(static_cast<double>(batch_admitted[f][b]) / batch_len);
      if (batch_arrivals[f][b] > 0) {
        blocking.push_back(1.0 - static_cast<double>(batch_admitted[f][b]) /
                                     static_cast<double>(batch_arrivals[f][b]));
      }
    }
    result.carried_per_flow[f] = detail::batch_estimate(carried);
    result.blocking_per_flow[f] = detail::batch_estimate(blocking);
  }
  return result;
}

}  // namespace sliceforge
