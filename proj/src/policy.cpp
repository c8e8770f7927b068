#include "flowcanvas/policy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace flowcanvas {

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     const std::vector<std::string>& sources, double epsilon) {
    if (rewards.empty()) throw EmptyGroup("advantage normalization over an empty group");
    if (rewards.size() != sources.size()) {
        throw EmptyGroup("rewards and sources must be the same length");
    }
    if (epsilon <= 0.0) throw EmptyGroup("epsilon must be positive");

    std::map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < sources.size(); ++i) by_source[sources[i]].push_back(i);

    std::vector<double> advantages(rewards.size(), 0.0);
    for (const auto& [source, indices] : by_source) {
        (void)source;
        double mean = 0.0;
        for (auto i : indices) mean += rewards[i];
        mean /= static_cast<double>(indices.size());
        double var = 0.0;
        for (auto i : indices) {
            double d = rewards[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(indices.size());  // population variance
        double denom = std::sqrt(var) + epsilon;
        for (auto i : indices) advantages[i] = (rewards[i] - mean) / denom;
    }
    return advantages;
}

ObjectiveResult surrogate_objective(const GroupBatch& batch,
                                    const std::vector<double>& advantages) {
    if (batch.trajectories.empty()) throw EmptyGroup("empty batch");
    if (advantages.size() != batch.trajectories.size()) {
        throw EmptyGroup("advantages must align with trajectories");
    }

    ObjectiveResult result;
    result.per_token_terms.resize(batch.trajectories.size());
    double sum_over_trajectories = 0.0;
    for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        const auto& traj = batch.trajectories[i];
        result.per_token_terms[i].assign(traj.tokens.size(), 0.0);
        double masked_sum = 0.0;
        int masked_count = 0;
        for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
            const TokenRecord& tok = traj.tokens[t];
            if (tok.mask == 0) continue;
            double rho = std::exp(tok.logprob_new - tok.logprob_old);
            double clipped = std::clamp(rho, 1.0 - batch.clip_epsilon, 1.0 + batch.clip_epsilon);
            double term = std::min(rho * advantages[i], clipped * advantages[i]);
            result.per_token_terms[i][t] = term;
            masked_sum += term;
            masked_count++;
        }
        if (masked_count == 0) {
            throw NoMaskedTokens("trajectory " + std::to_string(i) + " has no masked tokens");
        }
        sum_over_trajectories += masked_sum / masked_count;
    }
    result.surrogate = sum_over_trajectories / static_cast<double>(batch.trajectories.size());
    result.kl = kl_estimate(batch);
    result.objective = result.surrogate - batch.kl_beta * result.kl;
    return result;
}

double kl_estimate(const GroupBatch& batch) {
    double sum = 0.0;
    int count = 0;
    for (const auto& traj : batch.trajectories) {
        for (const auto& tok : traj.tokens) {
            if (tok.mask == 0) continue;
            sum += tok.logprob_new - tok.logprob_ref;
            count++;
        }
    }
    if (count == 0) throw NoMaskedTokens("no masked tokens in batch");
    return sum / count;
}

}  // namespace flowcanvas
