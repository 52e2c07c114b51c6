#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bprelab/offspring.hpp"
#include "bprelab/rng.hpp"

#include "json.hpp"

namespace bprelab {

//! Stationary ergodic environment over a finite set of offspring laws.
//!
//! Two kinds: iid draws from a weight vector, or a finite-state Markov chain
//! started from (and checked against) its stationary law. The stationary
//! law is what every annealed expectation below integrates against.
class EnvironmentProcess {
public:
    enum class Kind { iid, markov };

    static EnvironmentProcess iid(std::vector<OffspringDistribution> states,
                                  std::vector<double> weights);
    static EnvironmentProcess markov(std::vector<OffspringDistribution> states,
                                     std::vector<std::vector<double>> transition,
                                     std::vector<double> initial);
    static EnvironmentProcess from_json(const nlohmann::json& spec);

    Kind kind() const { return kind_; }
    std::size_t state_count() const { return states_->size(); }
    const OffspringDistribution& state(std::size_t i) const { return (*states_)[i]; }
    const std::vector<double>& stationary() const { return stationary_; }
    const std::vector<std::vector<double>>& transition() const { return transition_; }

    std::shared_ptr<const std::vector<OffspringDistribution>> states_ptr() const {
        return states_;
    }

    nlohmann::json to_json() const;

private:
    EnvironmentProcess() = default;

    Kind kind_ = Kind::iid;
    std::shared_ptr<const std::vector<OffspringDistribution>> states_;
    std::vector<double> stationary_;                // sampling weights / initial law
    std::vector<std::vector<double>> transition_;   // empty for iid
    nlohmann::json spec_;                           // normalized echo of the input
};

//! Realized environment sequence with cached running mean products.
//!
//! A cheap value type: views share the underlying state table and index
//! array, so shifting (dropping the first j entries) is O(remaining) for the
//! product cache and does not copy the states.
class EnvironmentPath {
public:
    EnvironmentPath(std::shared_ptr<const std::vector<OffspringDistribution>> states,
                    std::shared_ptr<const std::vector<std::uint32_t>> indices,
                    std::size_t offset, std::size_t length);

    // path made of an explicit state sequence (tests, constant environments)
    static EnvironmentPath from_states(std::vector<OffspringDistribution> states,
                                       std::vector<std::uint32_t> indices);
    static EnvironmentPath constant(const OffspringDistribution& d, std::size_t length);

    std::size_t length() const { return length_; }
    const OffspringDistribution& dist(std::size_t k) const;
    std::uint32_t state_index(std::size_t k) const;
    double mean_at(std::size_t k) const { return dist(k).mean(); }

    // running mean product, M(0) = 1, M(k) = m_0 * ... * m_{k-1}
    double mean_product(std::size_t k) const;

    // view advanced by j steps (the shifted environment)
    EnvironmentPath shifted(std::size_t j) const;

private:
    std::shared_ptr<const std::vector<OffspringDistribution>> states_;
    std::shared_ptr<const std::vector<std::uint32_t>> indices_;
    std::size_t offset_ = 0;
    std::size_t length_ = 0;
    std::vector<double> mean_prod_;  // size length_+1
};

// Draws a path of the given length. One uniform is consumed per step, so a
// longer path with the same seed extends the shorter one entry for entry.
EnvironmentPath sample_path(const EnvironmentProcess& proc, std::size_t length,
                            std::uint64_t seed);

struct DriftEstimate {
    double mu = 0.0;             // stationary mean of log m_0
    bool nonextin_ok = false;    // no charged state is a point mass at 0
    double nondeg_prob = 0.0;    // stationary probability that xi_0 != delta_1
    bool valid = true;           // false when some state has mean 0
};

// Exact stationary computation of the drift criterion quantities.
DriftEstimate drift_estimate(const EnvironmentProcess& proc);

// Simulation cross-check: (1/n) sum log m_k along one sampled path.
double drift_mc(const EnvironmentProcess& proc, std::size_t n, std::uint64_t seed);

}  // namespace bprelab
