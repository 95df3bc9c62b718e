#include "bffg/dag.hpp"

#include "bffg/finite_state.hpp"

namespace bffg {

namespace {

void check_cards(const std::vector<int>& cards) {
  if (cards.empty()) throw ValidationError("joint kernel: no parents");
  for (int c : cards)
    if (c < 1) throw ValidationError("joint kernel: parent cardinality must be positive");
}

}  // namespace

int joint_size(const std::vector<int>& cards) {
  check_cards(cards);
  long long n = 1;
  for (int c : cards) {
    n *= c;
    if (n > (1 << 24)) throw ValidationError("joint kernel: configuration space too large");
  }
  return static_cast<int>(n);
}

int joint_index(const std::vector<int>& cards, const std::vector<int>& config) {
  if (config.size() != cards.size())
    throw ValidationError("joint_index: configuration length mismatch");
  int idx = 0;
  for (size_t i = 0; i < cards.size(); ++i) {
    if (config[i] < 0 || config[i] >= cards[i])
      throw ValidationError("joint_index: state out of range");
    idx = idx * cards[i] + config[i];
  }
  return idx;
}

std::vector<int> joint_config(const std::vector<int>& cards, int index) {
  std::vector<int> config(cards.size());
  for (int i = static_cast<int>(cards.size()) - 1; i >= 0; --i) {
    config[i] = index % cards[i];
    index /= cards[i];
  }
  if (index != 0) throw ValidationError("joint_config: index out of range");
  return config;
}

FiniteJointKernel FiniteJointKernel::matched(std::vector<int> cards, const Mat& k) {
  return with_aux(std::move(cards), k, k);
}

FiniteJointKernel FiniteJointKernel::with_aux(std::vector<int> cards, const Mat& k,
                                              const Mat& aux) {
  if (k.rows() != bffg::joint_size(cards))
    throw ValidationError("joint kernel: row count does not match parent cardinalities");
  FiniteKernel checked = FiniteKernel::with_aux(k, aux);  // reuse stochasticity checks
  return {std::move(cards), checked.trans, checked.aux_trans};
}

VectorPotential dag_joint_pullback(const FiniteJointKernel& k, const VectorPotential& g) {
  if (g.size() != k.to_states())
    throw ValidationError("dag_joint_pullback: potential size mismatch");
  Vec out(k.joint_size());
  for (int i = 0; i < k.joint_size(); ++i) out[i] = log_row_dot(k.aux_trans, i, g.log_values);
  return {out};
}

std::vector<VectorPotential> dag_factorize(const std::vector<int>& cards,
                                           const VectorPotential& joint, const Vec& pi) {
  const int n = joint_size(cards);
  if (joint.size() != n) throw ValidationError("dag_factorize: joint potential size mismatch");
  if (cards.size() == 1) return {joint};
  if (pi.size() != n) throw ValidationError("dag_factorize: reference distribution size mismatch");
  double mass = 0;
  for (int i = 0; i < n; ++i) {
    if (pi[i] < 0) throw ValidationError("dag_factorize: negative reference probability");
    mass += pi[i];
  }
  if (std::abs(mass - 1.0) > 1e-9)
    throw ValidationError("dag_factorize: reference distribution does not sum to 1");

  // log E_pi[exp(joint)], the zero-mass fallback value
  Vec overall_terms(n);
  for (int i = 0; i < n; ++i)
    overall_terms[i] = pi[i] > 0 && joint.log_values[i] != kNegInf
                           ? std::log(pi[i]) + joint.log_values[i]
                           : kNegInf;
  double overall = log_sum_exp(overall_terms);

  std::vector<VectorPotential> factors;
  factors.reserve(cards.size());
  for (size_t u = 0; u < cards.size(); ++u) {
    Vec f(cards[u]);
    for (int s = 0; s < cards[u]; ++s) {
      double num = kNegInf, den = kNegInf;
      for (int i = 0; i < n; ++i) {
        if (joint_config(cards, i)[u] != s || pi[i] == 0) continue;
        double lp = std::log(pi[i]);
        den = log_sum_exp(den, lp);
        if (joint.log_values[i] != kNegInf)
          num = log_sum_exp(num, lp + joint.log_values[i]);
      }
      f[s] = den == kNegInf ? overall : num - den;
    }
    factors.push_back({f});
  }
  return factors;
}

int dag_guided_sample(const FiniteJointKernel& k, const VectorPotential& g,
                      const std::vector<int>& parent_states, Rng& rng) {
  FiniteKernel flat{k.trans, k.aux_trans};
  return fs_guided_sample(flat, g, joint_index(k.parent_cards, parent_states), rng);
}

double dag_log_weight(const FiniteJointKernel& k, const VectorPotential& g,
                      const std::vector<VectorPotential>& factors,
                      const std::vector<int>& parent_states) {
  if (factors.size() != k.parent_cards.size())
    throw ValidationError("dag_log_weight: factor count does not match parent count");
  int row = joint_index(k.parent_cards, parent_states);
  double num = log_row_dot(k.trans, row, g.log_values);
  double den = 0;
  for (size_t u = 0; u < factors.size(); ++u) den += factors[u].log_values[parent_states[u]];
  return num - den;
}

}  // namespace bffg
