#include "icee/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "icee/checkpoint.hpp"

namespace icee {

namespace {

template <typename T>
T get(const nlohmann::json& obj, const char* key, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
}

std::size_t get_count(const nlohmann::json& obj, const char* key, std::size_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    return it->get<std::size_t>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_per_class < 5) throw ConfigError("n_per_class must be at least 5");
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (p_grid.empty()) throw ConfigError("p_grid must not be empty");
    for (double p : p_grid)
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p values must lie in (0, 1]");
    if (strategies.empty()) throw ConfigError("strategies must not be empty");
    for (double lr : {target.lr, concepts.lr, user.lr})
        if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be positive");
    if (target.batch == 0 || concepts.batch == 0 || user.batch == 0) throw ConfigError("batch sizes must be positive");
    if (target.epochs == 0 || concepts.epochs == 0) throw ConfigError("epochs must be positive");
    if (concepts.m < 2 || concepts.m > target::kFeatures) throw ConfigError("concepts.m must lie in [2, 64]");
    if (out_dir.empty()) throw ConfigError("out must not be empty");
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    reject_unknown(doc,
                   {"seed", "n_per_class", "target", "concepts", "user", "strategies", "p_grid", "runs", "out",
                    "sweep_user", "masked_retraining", "bt_exemplar", "dwm_masked_base", "refit_users_per_run",
                    "saliency_norm"},
                   "");
    ExperimentConfig c;
    c.seed = get<std::uint64_t>(doc, "seed", c.seed);
    c.n_per_class = get_count(doc, "n_per_class", c.n_per_class);
    c.runs = get_count(doc, "runs", c.runs);
    c.out_dir = get<std::string>(doc, "out", c.out_dir.string());
    c.masked_retraining = get<bool>(doc, "masked_retraining", c.masked_retraining);
    c.bt_exemplar = get<bool>(doc, "bt_exemplar", c.bt_exemplar);
    c.dwm_masked_base = get<bool>(doc, "dwm_masked_base", c.dwm_masked_base);
    c.refit_users_per_run = get<bool>(doc, "refit_users_per_run", c.refit_users_per_run);
    c.p_grid = get<std::vector<double>>(doc, "p_grid", c.p_grid);

    try {
        if (doc.contains("sweep_user")) c.sweep_user = synth::parse_user_kind(doc["sweep_user"].get<std::string>());
        if (doc.contains("saliency_norm"))
            c.saliency_norm = explain::parse_saliency_norm(doc["saliency_norm"].get<std::string>());
        if (doc.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : doc["strategies"]) c.strategies.push_back(selection::parse_strategy(s.get<std::string>()));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    if (doc.contains("target")) {
        const auto& t = doc["target"];
        reject_unknown(t, {"lr", "epochs", "batch"}, "target.");
        c.target.lr = get<double>(t, "lr", c.target.lr);
        c.target.epochs = get_count(t, "epochs", c.target.epochs);
        c.target.batch = get_count(t, "batch", c.target.batch);
    }
    if (doc.contains("concepts")) {
        const auto& t = doc["concepts"];
        reject_unknown(t, {"m", "init", "lr", "epochs", "batch"}, "concepts.");
        c.concepts.m = get_count(t, "m", c.concepts.m);
        c.concepts.lr = get<double>(t, "lr", c.concepts.lr);
        c.concepts.epochs = get_count(t, "epochs", c.concepts.epochs);
        c.concepts.batch = get_count(t, "batch", c.concepts.batch);
        if (t.contains("init")) {
            try {
                c.concepts.init = concepts::parse_concept_init(t["init"].get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (doc.contains("user")) {
        const auto& t = doc["user"];
        reject_unknown(t, {"lr", "epochs", "batch"}, "user.");
        c.user.lr = get<double>(t, "lr", c.user.lr);
        c.user.epochs = get_count(t, "epochs", c.user.epochs);
        c.user.batch = get_count(t, "batch", c.user.batch);
    }
    c.validate();
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json doc;
    doc["seed"] = c.seed;
    doc["n_per_class"] = c.n_per_class;
    doc["target"] = {{"lr", c.target.lr}, {"epochs", c.target.epochs}, {"batch", c.target.batch}};
    doc["concepts"] = {{"m", c.concepts.m},
                       {"init", std::string(concepts::to_string(c.concepts.init))},
                       {"lr", c.concepts.lr},
                       {"epochs", c.concepts.epochs},
                       {"batch", c.concepts.batch}};
    doc["user"] = {{"lr", c.user.lr}, {"epochs", c.user.epochs}, {"batch", c.user.batch}};
    auto& names = doc["strategies"] = nlohmann::json::array();
    for (auto s : c.strategies) names.push_back(std::string(selection::to_string(s)));
    doc["p_grid"] = c.p_grid;
    doc["runs"] = c.runs;
    doc["out"] = c.out_dir.string();
    doc["sweep_user"] = std::string(synth::to_string(c.sweep_user));
    doc["masked_retraining"] = c.masked_retraining;
    doc["bt_exemplar"] = c.bt_exemplar;
    doc["dwm_masked_base"] = c.dwm_masked_base;
    doc["refit_users_per_run"] = c.refit_users_per_run;
    doc["saliency_norm"] = std::string(explain::to_string(c.saliency_norm));
    return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

std::size_t budget_size(double p, std::size_t pool_size) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("budget_size: p must lie in (0, 1]");
    const double raw = p * static_cast<double>(pool_size);
    const double nearest = std::round(raw);
    const double m = std::abs(raw - nearest) < 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
    return std::min(pool_size, static_cast<std::size_t>(m));
}

}  // namespace icee
