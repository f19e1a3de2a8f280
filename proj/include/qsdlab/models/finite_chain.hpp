#pragma once

#include <memory>
#include <string>
#include <vector>

#include "../chain.hpp"
#include "../process.hpp"

namespace qsdlab {

// Exact (Gillespie) simulation of a finite sub-Markov chain. States carry the
// index in x[0].
class ChainModel {
 public:
  explicit ChainModel(SubMarkovChain chain) : chain_(std::make_shared<const SubMarkovChain>(std::move(chain))) {
    const std::size_t n = chain_->size();
    cumulative_.assign(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) acc += chain_->generator()(i, j);
        cumulative_[i][j] = acc;
      }
      cumulative_[i][n] = acc + chain_->killing()[i];
    }
  }

  const SubMarkovChain& chain() const { return *chain_; }
  std::size_t size() const { return chain_->size(); }

  Transition next(const AbsorbedState& s, double t, double, Rng& rng, const StepControls&) const {
    const std::size_t i = s.index();
    if (i >= size()) throw ValidationError("ChainModel: state index out of range");
    const auto& cum = cumulative_[i];
    const double total = cum.back();
    Transition tr;
    tr.time = t + sample_waiting_time(total, rng);
    if (!std::isfinite(tr.time)) return tr;
    const double u = rng.uniform() * total;
    const std::size_t n = size();
    std::size_t j = 0;
    while (j < n && !(u < cum[j])) ++j;
    if (j == n) {
      tr.after = AbsorbedState::cemetery();
      tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
    } else {
      tr.after = AbsorbedState::chain_state(j);
      tr.event = JumpEvent{tr.time, EventKind::state_jump, {static_cast<double>(j) - static_cast<double>(i)}};
    }
    return tr;
  }

  AbsorbedState evolve(const AbsorbedState& s, double) const { return s; }
  bool piecewise_constant() const { return true; }

  std::string describe() const {
    std::ostringstream os;
    write_chain(os, *chain_);
    return "chain:" + os.str();
  }

 private:
  std::shared_ptr<const SubMarkovChain> chain_;
  std::vector<std::vector<double>> cumulative_;
};

}  // namespace qsdlab
