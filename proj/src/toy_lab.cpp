#include "flowcanvas/toy_lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace flowcanvas {

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
    double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return probs;
}

// Uniform draw in [0,1) from pinned mt19937_64 output; std::distributions are
// implementation-defined, which would break cross-platform seed determinism.
double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t sample_index(std::mt19937_64& rng, const std::vector<double>& probs) {
    double u = unit_draw(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

double template_reward(const ToyTemplate& t, bool gated) {
    if (!gated) return t.r_answer;
    double gate = t.r_diversity == 1.0 ? t.r_answer : 0.0;
    return -1.0 + t.r_diversity + gate;
}

}  // namespace

std::vector<double> ToyPolicy::probs() const { return softmax(logits); }

std::vector<double> surrogate_gradient(const std::vector<double>& logits,
                                       const GroupBatch& batch,
                                       const std::vector<double>& advantages) {
    auto p = softmax(logits);
    std::vector<double> grad(logits.size(), 0.0);
    const double n_traj = static_cast<double>(batch.trajectories.size());

    // Masked token count for the KL term.
    int masked_total = 0;
    for (const auto& traj : batch.trajectories) {
        for (const auto& tok : traj.tokens) masked_total += tok.mask;
    }

    for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        const auto& traj = batch.trajectories[i];
        int masked = 0;
        for (const auto& tok : traj.tokens) masked += tok.mask;
        if (masked == 0) continue;
        for (const auto& tok : traj.tokens) {
            if (tok.mask == 0) continue;
            double rho = std::exp(tok.logprob_new - tok.logprob_old);
            double clipped = std::clamp(rho, 1.0 - batch.clip_epsilon, 1.0 + batch.clip_epsilon);
            // min(rho*A, clip*A): the unclipped branch is active (and carries
            // the only nonzero derivative) iff it is the smaller term.
            bool active = rho * advantages[i] <= clipped * advantages[i];
            double coeff = active ? advantages[i] * rho / (masked * n_traj) : 0.0;
            double kl_coeff =
                batch.kl_beta != 0.0 ? batch.kl_beta / static_cast<double>(masked_total) : 0.0;
            auto k = static_cast<std::size_t>(tok.token_id);
            for (std::size_t j = 0; j < grad.size(); ++j) {
                double dlog = (j == k ? 1.0 : 0.0) - p[j];
                grad[j] += coeff * dlog - kl_coeff * dlog;
            }
        }
    }
    return grad;
}

ToyTrainTrace toy_train(const ToyConfig& config, int steps, std::uint64_t seed, bool gated) {
    bool any_feasible = false;
    bool any_shortcut = false;
    for (const auto& t : config.templates) {
        if (t.r_diversity == 1.0) any_feasible = true;
        if (t.r_diversity < 1.0 && t.r_answer > 0.0) any_shortcut = true;
    }
    if (config.templates.size() < 2 || !any_feasible || !any_shortcut) {
        throw InvalidAlphabet(
            "alphabet needs at least one feasible and one shortcut template");
    }
    if (config.group_size < 2) throw InvalidAlphabet("group_size must be >= 2");

    std::mt19937_64 rng(seed);
    std::vector<double> logits(config.templates.size(), 0.0);
    const std::vector<double> ref_logprobs = [&] {
        auto p = softmax(logits);
        std::vector<double> lp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) lp[i] = std::log(p[i]);
        return lp;
    }();

    ToyTrainTrace trace;
    auto feasible_mass = [&](const std::vector<double>& probs) {
        double mass = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (config.templates[i].r_diversity == 1.0) mass += probs[i];
        }
        return mass;
    };

    for (int step = 0; step < steps; ++step) {
        auto probs = softmax(logits);
        GroupBatch batch;
        batch.epsilon = config.advantage_epsilon;
        batch.clip_epsilon = config.clip_epsilon;
        batch.kl_beta = config.kl_beta;
        std::vector<double> rewards;
        std::vector<std::string> sources;
        for (int g = 0; g < config.group_size; ++g) {
            std::size_t idx = sample_index(rng, probs);
            TrajectoryTokens traj;
            traj.source = "toy";
            traj.reward = template_reward(config.templates[idx], gated);
            TokenRecord tok;
            tok.token_id = static_cast<int>(idx);
            tok.logprob_new = std::log(probs[idx]);
            tok.logprob_old = tok.logprob_new;  // behavior policy refreshed per step
            tok.logprob_ref = ref_logprobs[idx];
            tok.mask = 1;
            traj.tokens.push_back(tok);
            batch.trajectories.push_back(std::move(traj));
            rewards.push_back(batch.trajectories.back().reward);
            sources.push_back("toy");
        }
        auto advantages = group_advantages(rewards, sources, config.advantage_epsilon);
        auto objective = surrogate_objective(batch, advantages);
        auto grad = surrogate_gradient(logits, batch, advantages);
        for (std::size_t j = 0; j < logits.size(); ++j) {
            logits[j] += config.learning_rate * grad[j];
        }
        trace.steps.push_back({feasible_mass(softmax(logits)), objective.objective});
    }

    trace.final_distribution = softmax(logits);
    trace.final_feasible_mass = feasible_mass(trace.final_distribution);
    return trace;
}

double finite_diff_gradcheck(const ToyPolicy& policy, const BatchBuilder& builder, double h) {
    auto objective_at = [&](const std::vector<double>& logits) {
        auto [batch, advantages] = builder(logits);
        return surrogate_objective(batch, advantages).objective;
    };

    auto [batch, advantages] = builder(policy.logits);
    auto analytic = surrogate_gradient(policy.logits, batch, advantages);

    double max_err = 0.0;
    for (std::size_t j = 0; j < policy.logits.size(); ++j) {
        auto plus = policy.logits;
        auto minus = policy.logits;
        plus[j] += h;
        minus[j] -= h;
        double numeric = (objective_at(plus) - objective_at(minus)) / (2.0 * h);
        double denom = std::max({1.0, std::abs(analytic[j]), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(analytic[j] - numeric) / denom);
    }
    return max_err;
}

}  // namespace flowcanvas
