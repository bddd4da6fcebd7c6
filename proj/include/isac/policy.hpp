#pragma once

#include <algorithm>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "isac/covariance.hpp"
#include "isac/dp.hpp"
#include "isac/errors.hpp"
#include "isac/gains.hpp"
#include "isac/random.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Mode-selection rule. Policies see only the covariance pair and the stage
// index, never the realized state or estimates, so anything expressible here
// is implementable on both sides of the link.
class SwitchingPolicy {
 public:
  virtual ~SwitchingPolicy() = default;
  virtual ModeAction decide(const CovPair& belief, int stage,
                            RandomStream& stream) const = 0;
  virtual std::string name() const = 0;
};

class AlwaysSensePolicy final : public SwitchingPolicy {
 public:
  ModeAction decide(const CovPair&, int, RandomStream&) const override {
    return ModeAction::Sense;
  }
  std::string name() const override { return "always-sense"; }
};

class AlwaysCommunicatePolicy final : public SwitchingPolicy {
 public:
  ModeAction decide(const CovPair&, int, RandomStream&) const override {
    return ModeAction::Communicate;
  }
  std::string name() const override { return "always-comm"; }
};

// Communicates once every `period` slots: with phase 0 and period 2 the mode
// sequence is Sense, Communicate, Sense, Communicate, ...
class PeriodicPolicy final : public SwitchingPolicy {
 public:
  explicit PeriodicPolicy(int period, int phase = 0)
      : period_(period), phase_(phase) {
    if (period < 1) {
      throw ValidationError("periodic policy: period must be at least 1");
    }
    if (phase < 0) {
      throw ValidationError("periodic policy: phase must be nonnegative");
    }
  }

  ModeAction decide(const CovPair&, int stage, RandomStream&) const override {
    return ((stage + phase_) % period_ == period_ - 1)
               ? ModeAction::Communicate
               : ModeAction::Sense;
  }

  std::string name() const override {
    std::string n = "periodic:" + std::to_string(period_);
    if (phase_ != 0) n += ":" + std::to_string(phase_);
    return n;
  }

 private:
  int period_;
  int phase_;
};

class RandomModePolicy final : public SwitchingPolicy {
 public:
  explicit RandomModePolicy(double p_comm) : p_comm_(p_comm) {
    if (!(p_comm >= 0.0 && p_comm <= 1.0)) {
      throw ValidationError("random policy: p_comm must lie in [0, 1]");
    }
  }

  ModeAction decide(const CovPair&, int, RandomStream& stream) const override {
    return stream.bernoulli(p_comm_) ? ModeAction::Communicate
                                     : ModeAction::Sense;
  }

  std::string name() const override {
    char buf[32];
    std::snprintf(buf, sizeof buf, "random:%g", p_comm_);
    return buf;
  }

 private:
  double p_comm_;
};

// Greedy one-step lookahead: picks the mode minimizing the expected next-slot
// estimation cost E[tr(Gamma_{k+1} P_{k+1})], with the terminal weight reused
// past the end of the schedule. Ties go to Sense.
inline ModeAction myopic_policy(const Matrix& P, const Matrix& Q, int k,
                                const GainSchedule& gains,
                                const ScenarioConfig& cfg) {
  const std::size_t next =
      std::min(static_cast<std::size_t>(k) + 1, gains.Gamma.size() - 1);
  const Matrix& weight = gains.Gamma.at(next);
  const CovPair state{P, Q};
  double expected[2] = {0.0, 0.0};
  for (ModeAction u : {ModeAction::Sense, ModeAction::Communicate}) {
    double acc = 0.0;
    for (const auto& [prob, successor] : expected_transitions(state, u, cfg)) {
      acc += prob * (weight * successor.P).trace();
    }
    expected[mode_index(u)] = acc;
  }
  return (expected[0] - expected[1] > kDecisionTieTolerance)
             ? ModeAction::Communicate
             : ModeAction::Sense;
}

class MyopicPolicy final : public SwitchingPolicy {
 public:
  MyopicPolicy(ScenarioConfig cfg, GainSchedule gains)
      : cfg_(std::move(cfg)), gains_(std::move(gains)) {}

  ModeAction decide(const CovPair& belief, int stage,
                    RandomStream&) const override {
    return myopic_policy(belief.P, belief.Q, stage, gains_, cfg_);
  }

  std::string name() const override { return "myopic"; }

 private:
  ScenarioConfig cfg_;
  GainSchedule gains_;
};

namespace detail {

inline int nearest_index(const Vector& coords, double x) {
  const auto pos = locate(coords, x);
  return pos.t < 0.5 ? pos.cell : pos.cell + 1;
}

}  // namespace detail

// Plays back solved decision maps by nearest-node lookup. Scalar scenarios
// only; the maps must cover stages 0..N consecutively.
class TablePolicy final : public SwitchingPolicy {
 public:
  TablePolicy(Grid grid, std::vector<DecisionMap> decisions)
      : grid_(std::move(grid)), decisions_(std::move(decisions)) {
    if (decisions_.empty()) {
      throw ValidationError("table policy: no decision maps given");
    }
    for (std::size_t k = 0; k < decisions_.size(); ++k) {
      if (decisions_[k].stage != static_cast<int>(k)) {
        throw ValidationError(
            "table policy: decision maps must cover stages 0..N "
            "consecutively");
      }
      if (decisions_[k].u.rows() != grid_.p.size() ||
          decisions_[k].u.cols() != grid_.q.size()) {
        throw ValidationError(
            "table policy: decision map shape does not match the grid");
      }
    }
  }

  explicit TablePolicy(const DpSolution& sol)
      : TablePolicy(sol.grid, sol.decisions) {}

  int last_stage() const { return static_cast<int>(decisions_.size()) - 1; }

  ModeAction decide(const CovPair& belief, int stage,
                    RandomStream&) const override {
    if (belief.P.size() != 1 || belief.Q.size() != 1) {
      throw DimensionError("table policy supports scalar scenarios only");
    }
    if (stage < 0 || stage > last_stage()) {
      throw ContractError("table policy: stage " + std::to_string(stage) +
                          " is outside the solved range 0.." +
                          std::to_string(last_stage()));
    }
    const int i = detail::nearest_index(grid_.p, belief.P(0, 0));
    const int j = detail::nearest_index(grid_.q, belief.Q(0, 0));
    return decisions_[static_cast<std::size_t>(stage)].u(i, j) == 1
               ? ModeAction::Communicate
               : ModeAction::Sense;
  }

  std::string name() const override { return "table"; }

 private:
  Grid grid_;
  std::vector<DecisionMap> decisions_;
};

// Builds a policy from its textual form: always-sense | always-comm | myopic
// | table | periodic:<period>[:<phase>] | random:<p_comm>. The table policy
// requires solved decision maps.
inline std::unique_ptr<SwitchingPolicy> make_policy(
    const std::string& text, const ScenarioConfig& cfg,
    const GainSchedule& gains, const TablePolicy* table) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string args =
      colon == std::string::npos ? "" : text.substr(colon + 1);

  auto parse_int = [&text](const std::string& s) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return value;
    } catch (const std::exception&) {
      throw ParseError("policy '" + text + "': expected an integer parameter");
    }
  };
  auto parse_double = [&text](const std::string& s) {
    try {
      std::size_t used = 0;
      const double value = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return value;
    } catch (const std::exception&) {
      throw ParseError("policy '" + text + "': expected a numeric parameter");
    }
  };

  if (head == "always-sense") return std::make_unique<AlwaysSensePolicy>();
  if (head == "always-comm") return std::make_unique<AlwaysCommunicatePolicy>();
  if (head == "myopic") return std::make_unique<MyopicPolicy>(cfg, gains);
  if (head == "periodic") {
    if (args.empty()) {
      throw ParseError("policy 'periodic' requires a period, e.g. periodic:2");
    }
    const auto second = args.find(':');
    if (second == std::string::npos) {
      return std::make_unique<PeriodicPolicy>(parse_int(args));
    }
    return std::make_unique<PeriodicPolicy>(parse_int(args.substr(0, second)),
                                            parse_int(args.substr(second + 1)));
  }
  if (head == "random") {
    if (args.empty()) {
      throw ParseError(
          "policy 'random' requires a probability, e.g. random:0.5");
    }
    return std::make_unique<RandomModePolicy>(parse_double(args));
  }
  if (head == "table") {
    if (table == nullptr) {
      throw ValidationError(
          "policy 'table' requires solved decision maps (--solve-dir)");
    }
    return std::make_unique<TablePolicy>(*table);
  }
  throw ParseError("unknown policy '" + text + "'");
}

}  // namespace isac
