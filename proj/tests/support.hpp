#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <qsdlab/chain.hpp>

namespace qsdlab::test {

inline std::string fixture(const std::string& name) { return std::string(QSDLAB_FIXTURES) + "/" + name; }

inline SubMarkovChain load_fixture(const std::string& name) { return load_chain(fixture(name)); }

inline const std::vector<std::string>& fixture_chains() {
  static const std::vector<std::string> names = {"one_state.mat", "two_state.mat", "symmetric_two_state.mat",
                                                 "three_state.mat", "five_state.mat"};
  return names;
}

// Binomial standard error of a proportion.
inline double binomial_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace qsdlab::test
