#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flowcanvas/policy.hpp"

namespace flowcanvas {

/// A trajectory template with fixed reward components. Feasible templates
/// have r_diversity == 1.0; a shortcut is a template with r_diversity < 1
/// but a high answer reward.
struct ToyTemplate {
    std::string name;
    double r_diversity = 0.0;
    double r_answer = 0.0;
};

struct ToyConfig {
    std::vector<ToyTemplate> templates;
    int group_size = 8;
    double learning_rate = 0.2;
    double clip_epsilon = 0.2;
    double kl_beta = 0.0;
    double advantage_epsilon = 1e-8;
};

class InvalidAlphabet : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Softmax policy over the template alphabet; one token per trajectory.
struct ToyPolicy {
    std::vector<double> logits;
    double learning_rate = 0.2;

    std::vector<double> probs() const;
};

/// Analytic gradient of surrogate_objective with respect to the logits.
/// Token ids index the logits; logprob_new values must equal the current
/// log-softmax (logprob_old / logprob_ref are treated as constants).
std::vector<double> surrogate_gradient(const std::vector<double>& logits,
                                       const GroupBatch& batch,
                                       const std::vector<double>& advantages);

struct ToyTrainStep {
    double feasible_mass = 0.0;
    double objective = 0.0;
};

struct ToyTrainTrace {
    std::vector<ToyTrainStep> steps;
    std::vector<double> final_distribution;
    double final_feasible_mass = 0.0;
};

/// Sampled-group policy updates on the toy alphabet. Each step samples
/// group_size single-token trajectories with the current policy (old policy
/// refreshed per step, reference fixed at the initial uniform policy),
/// scores them gated (-1 + r_div + [r_div == 1] * r_ans) or ungated
/// (r_answer only), standardizes within the group and ascends the analytic
/// gradient. Deterministic for a fixed seed.
ToyTrainTrace toy_train(const ToyConfig& config, int steps, std::uint64_t seed, bool gated);

/// Builds (batch, advantages) from the current logits; logprob_new must be
/// recomputed from the logits on every call so finite differences see the
/// dependency.
using BatchBuilder =
    std::function<std::pair<GroupBatch, std::vector<double>>(const std::vector<double>&)>;

/// Compares the analytic gradient against central finite differences of the
/// objective, coordinate by coordinate. Returns the maximum error relative
/// to max(1, |analytic|, |numeric|).
double finite_diff_gradcheck(const ToyPolicy& policy, const BatchBuilder& builder,
                             double h = 1e-5);

}  // namespace flowcanvas
