#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flowcanvas {

/// One token of a recorded trajectory. mask=1 for policy-generated tokens,
/// 0 for environment feedback; feedback tokens never contribute to the
/// objective or its gradient.
struct TokenRecord {
    int token_id = 0;
    double logprob_new = 0.0;
    double logprob_old = 0.0;
    double logprob_ref = 0.0;
    int mask = 1;
};

struct TrajectoryTokens {
    std::string source = "default";
    double reward = 0.0;
    std::vector<TokenRecord> tokens;
};

struct GroupBatch {
    std::vector<TrajectoryTokens> trajectories;
    double epsilon = 1e-8;       // advantage denominator
    double clip_epsilon = 0.2;
    double kl_beta = 0.0;
};

class EmptyGroup : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NoMaskedTokens : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Per-source standardization: (r - mu_src) / (sigma_src + epsilon) with the
/// population standard deviation. A source with identical rewards yields
/// all-zero advantages.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     const std::vector<std::string>& sources, double epsilon);

struct ObjectiveResult {
    double objective = 0.0;
    double surrogate = 0.0;   // masked clipped term, before the KL penalty
    double kl = 0.0;
    /// Per-token surrogate terms, aligned with batch token order; masked-out
    /// tokens hold exactly 0.
    std::vector<std::vector<double>> per_token_terms;
};

/// The masked clipped-surrogate objective: per masked token,
/// min(rho * A, clip(rho, 1-eps, 1+eps) * A) with rho = exp(lp_new - lp_old),
/// averaged per trajectory over its masked tokens, averaged over the group,
/// minus kl_beta * kl_estimate. Throws NoMaskedTokens when a trajectory has
/// no masked token.
ObjectiveResult surrogate_objective(const GroupBatch& batch,
                                    const std::vector<double>& advantages);

/// Masked mean of (lp_new - lp_ref) pooled over every masked token in the
/// batch. Trajectories whose mask is all zero contribute nothing; throws
/// NoMaskedTokens when the whole batch is masked out.
double kl_estimate(const GroupBatch& batch);

}  // namespace flowcanvas
