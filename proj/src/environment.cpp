#include "bprelab/environment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "bprelab/errors.hpp"
#include "bprelab/numeric.hpp"

namespace bprelab {

namespace {

void check_prob_vector(const std::vector<double>& v, const std::string& what) {
    if (v.empty()) throw ConfigError(what + ": empty probability vector");
    double total = 0.0;
    for (double p : v) {
        if (!(p >= 0.0)) throw ConfigError(what + ": negative entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError(what + ": entries sum to " + format17(total) + ", expected 1");
}

// irreducibility = single communicating class: every state reachable from 0
// along positive entries, forward and backward
bool irreducible(const std::vector<std::vector<double>>& p) {
    const std::size_t n = p.size();
    auto reach = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::deque<std::size_t> queue{0};
        seen[0] = 1;
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            for (std::size_t j = 0; j < n; ++j) {
                const double w = forward ? p[i][j] : p[j][i];
                if (w > 0.0 && !seen[j]) {
                    seen[j] = 1;
                    queue.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach(true) && reach(false);
}

OffspringDistribution state_from_json(const nlohmann::json& s, const std::string& where) {
    if (!s.is_object() || !s.contains("family"))
        throw ConfigError(where + ": state must be an object with a \"family\" key");
    const std::string family = s.at("family").get<std::string>();
    try {
        if (family == "explicit") {
            if (!s.contains("pmf") || !s.at("pmf").is_object())
                throw ConfigError(where + ": explicit family requires a \"pmf\" object");
            std::map<std::uint32_t, double> pmf;
            for (const auto& [key, val] : s.at("pmf").items()) {
                std::size_t pos = 0;
                unsigned long k = 0;
                try {
                    k = std::stoul(key, &pos);
                } catch (const std::exception&) {
                    pos = 0;
                }
                if (pos != key.size())
                    throw ConfigError(where + ": pmf key \"" + key +
                                      "\" is not a nonnegative integer");
                pmf[static_cast<std::uint32_t>(k)] = val.get<double>();
            }
            return OffspringDistribution::from_pmf(pmf);
        }
        if (family == "binary")
            return OffspringDistribution::binary(s.at("p0").get<double>(),
                                                 s.at("k").get<std::uint32_t>());
        if (family == "geometric")
            return OffspringDistribution::geometric(s.at("p").get<double>());
        if (family == "poisson")
            return OffspringDistribution::poisson(s.at("lambda").get<double>());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown family \"" + family + "\"");
}

}  // namespace

EnvironmentProcess EnvironmentProcess::iid(std::vector<OffspringDistribution> states,
                                           std::vector<double> weights) {
    if (states.empty()) throw ConfigError("environment: no states");
    if (states.size() != weights.size())
        throw ConfigError("environment: weights length differs from state count");
    check_prob_vector(weights, "environment.weights");
    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;

    EnvironmentProcess p;
    p.kind_ = Kind::iid;
    p.states_ = std::make_shared<const std::vector<OffspringDistribution>>(std::move(states));
    p.stationary_ = std::move(weights);
    return p;
}

EnvironmentProcess EnvironmentProcess::markov(std::vector<OffspringDistribution> states,
                                              std::vector<std::vector<double>> transition,
                                              std::vector<double> initial) {
    if (states.empty()) throw ConfigError("environment: no states");
    const std::size_t n = states.size();
    if (transition.size() != n)
        throw ConfigError("environment.transition: expected " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i) {
        if (transition[i].size() != n)
            throw ConfigError("environment.transition: row " + std::to_string(i) +
                              " has wrong length");
        check_prob_vector(transition[i], "environment.transition[" + std::to_string(i) + "]");
    }
    if (initial.size() != n)
        throw ConfigError("environment.initial: expected " + std::to_string(n) + " entries");
    check_prob_vector(initial, "environment.initial");

    // stationarity: (pi P)_j = pi_j within 1e-10
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += initial[i] * transition[i][j];
        if (std::abs(acc - initial[j]) > 1e-10)
            throw ConfigError("environment.initial: not stationary for the transition matrix "
                              "(component " + std::to_string(j) + " maps to " + format17(acc) + ")");
    }
    if (!irreducible(transition))
        throw ConfigError("environment.transition: chain is not irreducible");

    EnvironmentProcess p;
    p.kind_ = Kind::markov;
    p.states_ = std::make_shared<const std::vector<OffspringDistribution>>(std::move(states));
    p.stationary_ = std::move(initial);
    p.transition_ = std::move(transition);
    return p;
}

EnvironmentProcess EnvironmentProcess::from_json(const nlohmann::json& spec) {
    if (!spec.is_object()) throw ConfigError("environment: spec must be a JSON object");
    if (!spec.contains("kind")) throw ConfigError("environment: missing \"kind\"");
    const std::string kind = spec.at("kind").get<std::string>();
    if (!spec.contains("states") || !spec.at("states").is_array())
        throw ConfigError("environment: missing \"states\" array");

    std::vector<OffspringDistribution> states;
    for (std::size_t i = 0; i < spec.at("states").size(); ++i)
        states.push_back(state_from_json(spec.at("states")[i],
                                         "environment.states[" + std::to_string(i) + "]"));

    EnvironmentProcess p;
    if (kind == "iid") {
        std::vector<double> weights;
        if (spec.contains("weights")) {
            weights = spec.at("weights").get<std::vector<double>>();
        } else {
            weights.assign(states.size(), 1.0 / static_cast<double>(states.size()));
        }
        p = iid(std::move(states), std::move(weights));
    } else if (kind == "markov") {
        if (!spec.contains("transition"))
            throw ConfigError("environment: markov kind requires \"transition\"");
        if (!spec.contains("initial"))
            throw ConfigError("environment: markov kind requires \"initial\"");
        p = markov(std::move(states),
                   spec.at("transition").get<std::vector<std::vector<double>>>(),
                   spec.at("initial").get<std::vector<double>>());
    } else {
        throw ConfigError("environment: kind must be \"iid\" or \"markov\", got \"" + kind + "\"");
    }
    p.spec_ = spec;
    return p;
}

nlohmann::json EnvironmentProcess::to_json() const {
    if (!spec_.is_null()) return spec_;
    nlohmann::json j;
    j["kind"] = kind_ == Kind::iid ? "iid" : "markov";
    auto& states = j["states"] = nlohmann::json::array();
    for (const auto& d : *states_) {
        nlohmann::json pmf = nlohmann::json::object();
        auto ks = d.support();
        auto ps = d.probabilities();
        for (std::size_t i = 0; i < ks.size(); ++i) pmf[std::to_string(ks[i])] = ps[i];
        states.push_back({{"family", "explicit"}, {"pmf", pmf}});
    }
    if (kind_ == Kind::iid) {
        j["weights"] = stationary_;
    } else {
        j["transition"] = transition_;
        j["initial"] = stationary_;
    }
    return j;
}

EnvironmentPath::EnvironmentPath(
    std::shared_ptr<const std::vector<OffspringDistribution>> states,
    std::shared_ptr<const std::vector<std::uint32_t>> indices, std::size_t offset,
    std::size_t length)
    : states_(std::move(states)), indices_(std::move(indices)), offset_(offset),
      length_(length) {
    if (!states_ || !indices_) throw std::invalid_argument("path: null backing data");
    if (offset_ + length_ > indices_->size())
        throw std::invalid_argument("path: view exceeds index array");
    for (std::size_t k = offset_; k < offset_ + length_; ++k)
        if ((*indices_)[k] >= states_->size())
            throw std::invalid_argument("path: state index out of range");
    mean_prod_.resize(length_ + 1);
    mean_prod_[0] = 1.0;
    for (std::size_t k = 0; k < length_; ++k)
        mean_prod_[k + 1] = mean_prod_[k] * (*states_)[(*indices_)[offset_ + k]].mean();
}

EnvironmentPath EnvironmentPath::from_states(std::vector<OffspringDistribution> states,
                                             std::vector<std::uint32_t> indices) {
    if (indices.empty()) {
        indices.resize(states.size());
        for (std::size_t i = 0; i < indices.size(); ++i)
            indices[i] = static_cast<std::uint32_t>(i);
    }
    const std::size_t n = indices.size();
    return EnvironmentPath(
        std::make_shared<const std::vector<OffspringDistribution>>(std::move(states)),
        std::make_shared<const std::vector<std::uint32_t>>(std::move(indices)), 0, n);
}

EnvironmentPath EnvironmentPath::constant(const OffspringDistribution& d, std::size_t length) {
    return from_states({d}, std::vector<std::uint32_t>(length, 0));
}

const OffspringDistribution& EnvironmentPath::dist(std::size_t k) const {
    if (k >= length_) throw std::out_of_range("path: index past length");
    return (*states_)[(*indices_)[offset_ + k]];
}

std::uint32_t EnvironmentPath::state_index(std::size_t k) const {
    if (k >= length_) throw std::out_of_range("path: index past length");
    return (*indices_)[offset_ + k];
}

double EnvironmentPath::mean_product(std::size_t k) const {
    if (k > length_) throw std::out_of_range("path: mean product past length");
    return mean_prod_[k];
}

EnvironmentPath EnvironmentPath::shifted(std::size_t j) const {
    if (j > length_) throw std::out_of_range("path: shift past length");
    return EnvironmentPath(states_, indices_, offset_ + j, length_ - j);
}

EnvironmentPath sample_path(const EnvironmentProcess& proc, std::size_t length,
                            std::uint64_t seed) {
    if (length == 0) throw std::invalid_argument("sample_path: length must be positive");
    auto stream = make_stream(seed, StreamDomain::path, 0);
    auto indices = std::make_shared<std::vector<std::uint32_t>>();
    indices->reserve(length);

    // inverse-cdf scan; exactly one uniform per step so that a longer path
    // with the same seed extends the shorter one
    auto pick = [&](const std::vector<double>& weights) {
        const double u = stream.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<std::uint32_t>(i);
        }
        return static_cast<std::uint32_t>(weights.size() - 1);
    };

    if (proc.kind() == EnvironmentProcess::Kind::iid) {
        for (std::size_t k = 0; k < length; ++k) indices->push_back(pick(proc.stationary()));
    } else {
        std::uint32_t cur = pick(proc.stationary());
        indices->push_back(cur);
        for (std::size_t k = 1; k < length; ++k) {
            cur = pick(proc.transition()[cur]);
            indices->push_back(cur);
        }
    }
    return EnvironmentPath(proc.states_ptr(),
                           std::shared_ptr<const std::vector<std::uint32_t>>(std::move(indices)),
                           0, length);
}

DriftEstimate drift_estimate(const EnvironmentProcess& proc) {
    DriftEstimate out;
    double mu = 0.0;
    bool log_ok = true;
    bool no_sure_extinction_state = true;
    double nondeg = 0.0;
    for (std::size_t i = 0; i < proc.state_count(); ++i) {
        const double pi = proc.stationary()[i];
        if (pi <= 0.0) continue;
        const auto& d = proc.state(i);
        if (d.mean() <= 0.0) log_ok = false;
        else mu += pi * std::log(d.mean());
        if (d.p0() >= 1.0 - kPmfEps) no_sure_extinction_state = false;
        if (d.p0() + d.mass(1) < 1.0 - kPmfEps) nondeg += pi;
    }
    out.valid = log_ok;
    out.mu = log_ok ? mu : -std::numeric_limits<double>::infinity();
    out.nonextin_ok = no_sure_extinction_state;
    out.nondeg_prob = nondeg;
    return out;
}

double drift_mc(const EnvironmentProcess& proc, std::size_t n, std::uint64_t seed) {
    const auto path = sample_path(proc, n, seed);
    std::vector<double> logs(n);
    for (std::size_t k = 0; k < n; ++k) logs[k] = std::log(path.dist(k).mean());
    return pairwise_sum(logs) / static_cast<double>(n);
}

}  // namespace bprelab
