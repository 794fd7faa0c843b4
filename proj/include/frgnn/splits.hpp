#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "frgnn/error.hpp"

namespace frgnn {

enum class SplitKind { canonical, random, ppr_biased };

inline std::string_view to_string(SplitKind k) {
    switch (k) {
    case SplitKind::canonical: return "canonical";
    case SplitKind::random: return "random";
    case SplitKind::ppr_biased: return "ppr_biased";
    }
    return "?";
}

inline SplitKind parse_split_kind(std::string_view s) {
    if (s == "canonical") return SplitKind::canonical;
    if (s == "random") return SplitKind::random;
    if (s == "ppr_biased" || s == "biased") return SplitKind::ppr_biased;
    throw ConfigError("unknown split kind '" + std::string(s) + "' (expected canonical | random | biased)");
}

struct SplitProvenance {
    SplitKind kind = SplitKind::canonical;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    double eps = 0.0;
    std::size_t per_class_budget = 0;
    std::size_t val_size = 0;
    std::vector<std::size_t> class_seeds; ///< PPR seed per class (biased splits)
    std::vector<std::string> warnings;
};

/// Disjoint train/val/test node-id sets, each sorted ascending.
struct SplitMasks {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    SplitProvenance provenance;

    /// Throws DataError unless ids are in range, sorted, unique and the three sets are disjoint.
    void validate(std::size_t num_nodes) const {
        std::vector<char> seen(num_nodes, 0);
        auto check = [&](const std::vector<std::size_t>& ids, std::string_view name) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (ids[i] >= num_nodes) throw DataError(std::string(name) + " id out of range");
                if (i > 0 && ids[i] <= ids[i - 1]) throw DataError(std::string(name) + " ids not sorted/unique");
                if (seen[ids[i]]) throw DataError("split sets overlap at node " + std::to_string(ids[i]));
                seen[ids[i]] = 1;
            }
        };
        check(train, "train");
        check(val, "val");
        check(test, "test");
    }

    /// train ∪ val, sorted.
    std::vector<std::size_t> labeled() const {
        std::vector<std::size_t> out;
        out.reserve(train.size() + val.size());
        std::merge(train.begin(), train.end(), val.begin(), val.end(), std::back_inserter(out));
        return out;
    }
};

inline nlohmann::ordered_json to_json(const SplitMasks& s) {
    nlohmann::ordered_json prov;
    prov["kind"] = std::string(to_string(s.provenance.kind));
    prov["seed"] = s.provenance.seed;
    prov["alpha"] = s.provenance.alpha;
    prov["eps"] = s.provenance.eps;
    prov["per_class_budget"] = s.provenance.per_class_budget;
    prov["val_size"] = s.provenance.val_size;
    prov["class_seeds"] = s.provenance.class_seeds;
    prov["warnings"] = s.provenance.warnings;
    nlohmann::ordered_json j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    j["provenance"] = prov;
    return j;
}

inline SplitMasks split_from_json(const nlohmann::json& j) {
    SplitMasks s;
    try {
        s.train = j.at("train").get<std::vector<std::size_t>>();
        s.val = j.at("val").get<std::vector<std::size_t>>();
        s.test = j.at("test").get<std::vector<std::size_t>>();
        if (j.contains("provenance")) {
            const auto& p = j["provenance"];
            s.provenance.kind = parse_split_kind(p.value("kind", "canonical"));
            s.provenance.seed = p.value("seed", std::uint64_t{0});
            s.provenance.alpha = p.value("alpha", 0.0);
            s.provenance.eps = p.value("eps", 0.0);
            s.provenance.per_class_budget = p.value("per_class_budget", std::size_t{0});
            s.provenance.val_size = p.value("val_size", std::size_t{0});
            s.provenance.class_seeds = p.value("class_seeds", std::vector<std::size_t>{});
            s.provenance.warnings = p.value("warnings", std::vector<std::string>{});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("split JSON: ") + e.what());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

} // namespace frgnn
