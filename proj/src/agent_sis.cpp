#include "bffg/agent_sis.hpp"

namespace bffg {

namespace {

void check_rates(const Vec& infect, const Vec& recover,
                 const std::vector<std::vector<int>>& neighbors) {
  int n = static_cast<int>(infect.size());
  if (recover.size() != n || static_cast<int>(neighbors.size()) != n)
    throw ValidationError("sis kernel: rate/neighborhood length mismatch");
  for (int i = 0; i < n; ++i) {
    if (infect[i] <= 0 || infect[i] >= 1 || recover[i] <= 0 || recover[i] >= 1)
      throw ValidationError("sis kernel: rates must lie in (0,1)");
    for (int m : neighbors[i])
      if (m < 0 || m >= n || m == i)
        throw ValidationError("sis kernel: bad neighbor index");
  }
}

/* pmf of Binomial(n, p) in linear space. */
Vec binom_pmf_vec(int n, double p) {
  Vec out = Vec::Zero(n + 1);
  for (int k = 0; k <= n; ++k) {
    double lp = log_binom_pmf(k, n, p);
    out[k] = lp == kNegInf ? 0.0 : std::exp(lp);
  }
  return out;
}

}  // namespace

SISKernel SISKernel::make(const Vec& infect, const Vec& recover,
                          std::vector<std::vector<int>> neighbors) {
  return make(infect, recover, std::move(neighbors), infect.mean(), recover.mean());
}

SISKernel SISKernel::make(const Vec& infect, const Vec& recover,
                          std::vector<std::vector<int>> neighbors, double aux_infect,
                          double aux_recover) {
  check_rates(infect, recover, neighbors);
  if (aux_infect <= 0 || aux_infect >= 1 || aux_recover <= 0 || aux_recover >= 1)
    throw ValidationError("sis kernel: comparison rates must lie in (0,1)");
  return {infect, recover, std::move(neighbors), aux_infect, aux_recover};
}

int sis_infected_count(const std::vector<int>& x) {
  int c = 0;
  for (int s : x) c += (s == 1);
  return c;
}

Vec sis_flip_probs(const SISKernel& k, const std::vector<int>& x) {
  int n = k.agents();
  if (static_cast<int>(x.size()) != n)
    throw ValidationError("sis_flip_probs: configuration length mismatch");
  Vec alpha(n);
  for (int i = 0; i < n; ++i) {
    if (x[i] == 1) {
      alpha[i] = 1.0 - k.recover[i];
    } else {
      double frac = 0;
      if (!k.neighbors[i].empty()) {
        int inf = 0;
        for (int m : k.neighbors[i]) inf += (x[m] == 1);
        frac = static_cast<double>(inf) / static_cast<double>(k.neighbors[i].size());
      }
      alpha[i] = k.infect[i] * frac;
    }
  }
  return alpha;
}

Vec poibin_pmf(const Vec& probs) {
  int n = static_cast<int>(probs.size());
  Vec pmf = Vec::Zero(n + 1);
  pmf[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    double p = probs[i];
    if (p < 0 || p > 1) throw ValidationError("poibin_pmf: probability out of [0,1]");
    for (int k = i + 1; k >= 1; --k) pmf[k] = pmf[k] * (1 - p) + pmf[k - 1] * p;
    pmf[0] *= (1 - p);
  }
  return pmf;
}

std::vector<int> condber_sample(const Vec& probs, int total, Rng& rng) {
  int n = static_cast<int>(probs.size());
  if (total < 0 || total > n) throw ValidationError("condber_sample: total out of range");
  // suffix[i][s] = P(sum of Bernoullis i..n-1 equals s)
  std::vector<Vec> suffix(n + 1, Vec::Zero(n + 1));
  suffix[n][0] = 1.0;
  for (int i = n - 1; i >= 0; --i)
    for (int s = 0; s <= n - i; ++s) {
      double stay = suffix[i + 1][s] * (1 - probs[i]);
      double flip = s > 0 ? suffix[i + 1][s - 1] * probs[i] : 0.0;
      suffix[i][s] = stay + flip;
    }
  if (suffix[0][total] <= 0)
    throw NumericError("condber_sample: conditioning event has probability zero");
  std::vector<int> y(n);
  int remaining = total;
  for (int i = 0; i < n; ++i) {
    double p1 = remaining > 0 ? probs[i] * suffix[i + 1][remaining - 1] : 0.0;
    double p0 = (1 - probs[i]) * suffix[i + 1][remaining];
    double u = draw_uniform(rng) * (p0 + p1);
    if (u < p1) {
      y[i] = 1;
      --remaining;
    } else {
      y[i] = 0;
    }
  }
  return y;
}

CountPotential sis_pullback(const SISKernel& k, const CountPotential& g) {
  int n = k.agents();
  if (g.max_count() != n) throw ValidationError("sis_pullback: potential length mismatch");
  Vec out(n + 1);
  for (int s = 0; s <= n; ++s) {
    // next count = Bin(n - s, aux_infect * s / n) + Bin(s, 1 - aux_recover)
    Vec fresh = binom_pmf_vec(n - s, k.aux_infect * s / n);
    Vec carried = binom_pmf_vec(s, 1.0 - k.aux_recover);
    double best = kNegInf;
    Vec terms = Vec::Constant(n + 1, kNegInf);
    for (int c = 0; c <= n; ++c) {
      if (g.log_values[c] == kNegInf) continue;
      double mass = 0;
      for (int j = std::max(0, c - s); j <= std::min(n - s, c); ++j)
        mass += fresh[j] * carried[c - j];
      if (mass <= 0) continue;
      terms[c] = std::log(mass) + g.log_values[c];
      best = std::max(best, terms[c]);
    }
    out[s] = log_sum_exp(terms);
  }
  return {out};
}

CountPotential sis_fuse(const CountPotential& a, const CountPotential& b) {
  if (a.max_count() != b.max_count()) throw ValidationError("sis_fuse: length mismatch");
  return {a.log_values + b.log_values};
}

CountPotential sis_leaf_message(const SISObsKernel& k, int obs) {
  if (k.report_prob < 0 || k.report_prob > 1)
    throw ValidationError("sis_leaf_message: report probability out of [0,1]");
  Vec out(k.agents + 1);
  for (int i = 0; i <= k.agents; ++i) out[i] = log_binom_pmf(obs, i, k.report_prob);
  return {out};
}

std::vector<int> sis_guided_sample(const SISKernel& k, const CountPotential& g,
                                   const std::vector<int>& x, Rng& rng) {
  Vec alpha = sis_flip_probs(k, x);
  Vec count_pmf = poibin_pmf(alpha);
  Vec lw(count_pmf.size());
  for (int c = 0; c < lw.size(); ++c)
    lw[c] = count_pmf[c] > 0 && g.log_values[c] != kNegInf
                ? std::log(count_pmf[c]) + g.log_values[c]
                : kNegInf;
  int target = draw_categorical_log(rng, lw);
  return condber_sample(alpha, target, rng);
}

double sis_log_weight(const SISKernel& k, const CountPotential& g,
                      const CountPotential& message, const std::vector<int>& x) {
  Vec alpha = sis_flip_probs(k, x);
  Vec count_pmf = poibin_pmf(alpha);
  Vec terms = Vec::Constant(count_pmf.size(), kNegInf);
  for (int c = 0; c < count_pmf.size(); ++c)
    if (count_pmf[c] > 0 && g.log_values[c] != kNegInf)
      terms[c] = std::log(count_pmf[c]) + g.log_values[c];
  return log_sum_exp(terms) - message.log_values[sis_infected_count(x)];
}

double sis_leaf_log_weight(const SISObsKernel& k, int obs, const CountPotential& message,
                           const std::vector<int>& x) {
  int count = sis_infected_count(x);
  return log_binom_pmf(obs, count, k.report_prob) - message.log_values[count];
}

}  // namespace bffg
