#pragma once

// Finite sub-Markov generators and their plain-text fixture format.
//
// File format (.mat): optional '#' comment lines, then the state count n,
// then n rows of n generator entries. An optional trailing block
//   coords d
// followed by n rows of d numbers attaches a point embedding.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "state.hpp"

namespace qsdlab {

class SubMarkovChain {
 public:
  SubMarkovChain() = default;

  // Validates sign structure; irreducibility is checked separately because
  // some callers (restricted blocks, two-block constructions) want the
  // matrix before deciding.
  explicit SubMarkovChain(Matrix generator, std::vector<Point> embedding = {})
      : l_(std::move(generator)), embedding_(std::move(embedding)) {
    if (l_.rows() != l_.cols() || l_.rows() == 0) throw ValidationError("SubMarkovChain: generator must be square and nonempty");
    if (!embedding_.empty() && embedding_.size() != l_.rows())
      throw ValidationError("SubMarkovChain: embedding size differs from state count");
    const std::size_t n = l_.rows();
    killing_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = l_(i, j);
        if (!std::isfinite(v)) throw ValidationError("SubMarkovChain: non-finite generator entry");
        if (i != j && v < 0.0) throw ValidationError("SubMarkovChain: negative off-diagonal entry");
        rs += v;
      }
      const double scale = std::abs(l_(i, i)) + 1.0;
      if (rs > 1e-12 * scale) throw ValidationError("SubMarkovChain: positive row sum");
      killing_[i] = std::max(0.0, -rs);
    }
  }

  // Off-diagonal rates plus per-state killing.
  static SubMarkovChain from_rates(const Matrix& rates, const std::vector<double>& killing, std::vector<Point> embedding = {}) {
    const std::size_t n = rates.rows();
    if (killing.size() != n) throw ValidationError("from_rates: killing vector size mismatch");
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double out = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) {
          l(i, j) = rates(i, j);
          out += rates(i, j);
        }
      l(i, i) = -(out + killing[i]);
    }
    return SubMarkovChain(std::move(l), std::move(embedding));
  }

  std::size_t size() const { return l_.rows(); }
  const Matrix& generator() const { return l_; }
  const std::vector<double>& killing() const { return killing_; }
  const std::vector<Point>& embedding() const { return embedding_; }
  bool has_embedding() const { return !embedding_.empty(); }

  double max_exit_rate() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(l_(i, i)));
    return m;
  }

  bool irreducible() const {
    const std::size_t n = size();
    auto reach = [&](bool forward) {
      std::vector<char> seen(n, 0);
      std::queue<std::size_t> q;
      q.push(0);
      seen[0] = 1;
      std::size_t count = 1;
      while (!q.empty()) {
        const std::size_t i = q.front();
        q.pop();
        for (std::size_t j = 0; j < n; ++j) {
          const double rate = forward ? l_(i, j) : l_(j, i);
          if (j != i && rate > 0.0 && !seen[j]) {
            seen[j] = 1;
            ++count;
            q.push(j);
          }
        }
      }
      return count == n;
    };
    return reach(true) && reach(false);
  }

  void require_irreducible() const {
    if (!irreducible()) throw ValidationError("SubMarkovChain: live part is not irreducible");
  }

  // The chain killed on leaving `states` (rows and columns outside dropped).
  SubMarkovChain restricted(const std::vector<std::size_t>& states) const {
    const std::size_t m = states.size();
    Matrix sub(m, m);
    std::vector<Point> emb;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) sub(a, b) = l_(states[a], states[b]);
      if (has_embedding()) emb.push_back(embedding_[states[a]]);
    }
    return SubMarkovChain(std::move(sub), std::move(emb));
  }

  // Constant extra killing c on every state.
  SubMarkovChain with_extra_killing(double c) const {
    Matrix l = l_;
    for (std::size_t i = 0; i < size(); ++i) l(i, i) -= c;
    return SubMarkovChain(std::move(l), embedding_);
  }

 private:
  Matrix l_;
  std::vector<double> killing_;
  std::vector<Point> embedding_;
};

inline void write_chain(std::ostream& os, const SubMarkovChain& chain) {
  const std::size_t n = chain.size();
  os << std::setprecision(17) << n << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) os << (j ? " " : "") << chain.generator()(i, j);
    os << '\n';
  }
  if (chain.has_embedding()) {
    os << "coords " << chain.embedding().front().size() << '\n';
    for (const auto& p : chain.embedding()) {
      for (std::size_t k = 0; k < p.size(); ++k) os << (k ? " " : "") << p[k];
      os << '\n';
    }
  }
}

inline SubMarkovChain read_chain(std::istream& is) {
  std::string line;
  std::ostringstream body;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    body << line << '\n';
  }
  std::istringstream in(body.str());
  long long n = 0;
  if (!(in >> n) || n <= 0) throw ValidationError("chain file: missing or invalid state count");
  Matrix l(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j)
      if (!(in >> l(static_cast<std::size_t>(i), static_cast<std::size_t>(j))))
        throw ValidationError("chain file: expected " + std::to_string(n * n) + " generator entries");
  std::vector<Point> emb;
  std::string tag;
  if (in >> tag) {
    if (tag != "coords") throw ValidationError("chain file: unexpected token '" + tag + "'");
    long long d = 0;
    if (!(in >> d) || d <= 0) throw ValidationError("chain file: invalid coords dimension");
    emb.assign(static_cast<std::size_t>(n), Point(static_cast<std::size_t>(d)));
    for (auto& p : emb)
      for (auto& v : p)
        if (!(in >> v)) throw ValidationError("chain file: truncated coords block");
    if (in >> tag) throw ValidationError("chain file: trailing content");
  }
  return SubMarkovChain(std::move(l), std::move(emb));
}

inline SubMarkovChain load_chain(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open chain file: " + path);
  return read_chain(f);
}

}  // namespace qsdlab
