#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pfode/error.hpp"
#include "pfode/io.hpp"
#include "pfode/pipeline.hpp"
#include "pfode/schedule.hpp"

namespace pfode {

enum class DenoiserKind { oracle, local_linear };

/// Every tunable of a run. Defaults reproduce the documented demo behaviour.
struct RunConfig {
    // schedule
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    // codec
    std::size_t k = 4;
    // sampler
    SamplerKind sampler = SamplerKind::d1;
    int t_start = 400;
    std::uint64_t seed = 0;
    // guidance
    double nu = 1.0;
    JacobianMode grad_mode = JacobianMode::full;
    double cfg_scale = 0.0;
    int guidance_t_min = 1;
    int guidance_t_max = 1000000;
    std::string template_path;
    std::string shape_path;
    // phantoms
    PhantomSpec phantom{};
    std::size_t n_healthy = 40;
    std::size_t n_anomalous = 40;
    double train_fraction = 0.5;
    // denoiser
    DenoiserKind denoiser = DenoiserKind::oracle;
    OracleKind oracle = OracleKind::template_gaussian;
    /// Oracle component variance; 0 estimates it from the healthy training latents.
    double tau2 = 0.0;
    std::size_t buckets = 10;
    double lambda = 1e-3;
    std::size_t draws_per_volume = 4;
    // classifier and scoring
    int classifier_iterations = 2000;
    double classifier_learning_rate = 0.5;
    double classifier_l2 = 1e-3;
    SuvrReading m_suvr = SuvrReading::input;
    // rendering
    int render_slice = -1;

    [[nodiscard]] NoiseSchedule schedule() const { return linear_schedule(T, beta_start, beta_end); }

    [[nodiscard]] PhantomSpec phantom_spec() const {
        PhantomSpec p = phantom;
        p.codec.k = k;
        p.seed = seed;
        return p;
    }

    [[nodiscard]] ClassifierOptions classifier_options() const {
        return {classifier_iterations, classifier_learning_rate, classifier_l2, mix_seed(seed, 0xc1a55)};
    }

    [[nodiscard]] std::uint64_t sampler_seed() const { return mix_seed(seed, 0x5a3b1e); }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    return value;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

struct KeyBinding {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
KeyBinding number_key(const std::string& name, T RunConfig::*member) {
    return {[name, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(name, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
                else return std::to_string(c.*member);
            }};
}

template <class T>
KeyBinding phantom_key(const std::string& name, T PhantomSpec::*member) {
    return {[name, member](RunConfig& c, const std::string& v) { c.phantom.*member = parse_number<T>(name, v); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return format_double(c.phantom.*member);
                else return std::to_string(c.phantom.*member);
            }};
}

template <class E>
KeyBinding enum_key(const std::string& name, E RunConfig::*member, std::vector<std::pair<std::string, E>> names) {
    return {[name, member, names](RunConfig& c, const std::string& v) {
                for (const auto& [text, value] : names)
                    if (text == v) {
                        c.*member = value;
                        return;
                    }
                std::string options;
                for (const auto& [text, value] : names) options += (options.empty() ? "" : "|") + text;
                throw ConfigError("config key '" + name + "': '" + v + "' is not one of " + options);
            },
            [member, names](const RunConfig& c) {
                for (const auto& [text, value] : names)
                    if (value == c.*member) return text;
                return std::string("?");
            }};
}

inline KeyBinding string_key(std::string RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& v) { c.*member = v; },
            [member](const RunConfig& c) { return c.*member; }};
}

inline KeyBinding dim_key(const std::string& name, std::size_t Dims::*member) {
    return {[name, member](RunConfig& c, const std::string& v) { c.phantom.dims.*member = parse_number<std::size_t>(name, v); },
            [member](const RunConfig& c) { return std::to_string(c.phantom.dims.*member); }};
}

inline KeyBinding radius_key(const std::string& name, std::size_t axis) {
    return {[name, axis](RunConfig& c, const std::string& v) { c.phantom.radii[axis] = parse_number<double>(name, v); },
            [axis](const RunConfig& c) { return format_double(c.phantom.radii[axis]); }};
}

/// Ordered key table; the order fixes the resolved-config layout.
inline const std::vector<std::pair<std::string, KeyBinding>>& key_table() {
    static const std::vector<std::pair<std::string, KeyBinding>> table = [] {
        std::vector<std::pair<std::string, KeyBinding>> t;
        auto add = [&t](const std::string& name, KeyBinding b) { t.emplace_back(name, std::move(b)); };
        add("T", number_key("T", &RunConfig::T));
        add("beta_start", number_key("beta_start", &RunConfig::beta_start));
        add("beta_end", number_key("beta_end", &RunConfig::beta_end));
        add("k", number_key("k", &RunConfig::k));
        add("sampler", enum_key("sampler", &RunConfig::sampler,
                                {{"ancestral", SamplerKind::ancestral}, {"d1", SamplerKind::d1}, {"d2", SamplerKind::d2}}));
        add("t_start", number_key("t_start", &RunConfig::t_start));
        add("seed", number_key("seed", &RunConfig::seed));
        add("nu", number_key("nu", &RunConfig::nu));
        add("grad_mode", enum_key("grad_mode", &RunConfig::grad_mode,
                                  {{"full", JacobianMode::full}, {"stop_gradient", JacobianMode::stop_gradient}}));
        add("cfg_scale", number_key("cfg_scale", &RunConfig::cfg_scale));
        add("guidance_t_min", number_key("guidance_t_min", &RunConfig::guidance_t_min));
        add("guidance_t_max", number_key("guidance_t_max", &RunConfig::guidance_t_max));
        add("template_path", string_key(&RunConfig::template_path));
        add("shape_path", string_key(&RunConfig::shape_path));
        add("image_nx", dim_key("image_nx", &Dims::nx));
        add("image_ny", dim_key("image_ny", &Dims::ny));
        add("image_nz", dim_key("image_nz", &Dims::nz));
        add("shell_radius_x", radius_key("shell_radius_x", 0));
        add("shell_radius_y", radius_key("shell_radius_y", 1));
        add("shell_radius_z", radius_key("shell_radius_z", 2));
        add("shell_thickness", phantom_key("shell_thickness", &PhantomSpec::shell_thickness));
        add("cortex_level", phantom_key("cortex_level", &PhantomSpec::cortex_level));
        add("interior_level", phantom_key("interior_level", &PhantomSpec::interior_level));
        add("global_sd", phantom_key("global_sd", &PhantomSpec::global_sd));
        add("gradient_sd", phantom_key("gradient_sd", &PhantomSpec::gradient_sd));
        add("texture_sd", phantom_key("texture_sd", &PhantomSpec::texture_sd));
        add("anomaly_count_min", phantom_key("anomaly_count_min", &PhantomSpec::anomaly_count_min));
        add("anomaly_count_max", phantom_key("anomaly_count_max", &PhantomSpec::anomaly_count_max));
        add("blob_radius_min", phantom_key("blob_radius_min", &PhantomSpec::radius_min));
        add("blob_radius_max", phantom_key("blob_radius_max", &PhantomSpec::radius_max));
        add("magnitude_min", phantom_key("magnitude_min", &PhantomSpec::magnitude_min));
        add("magnitude_max", phantom_key("magnitude_max", &PhantomSpec::magnitude_max));
        add("n_healthy", number_key("n_healthy", &RunConfig::n_healthy));
        add("n_anomalous", number_key("n_anomalous", &RunConfig::n_anomalous));
        add("train_fraction", number_key("train_fraction", &RunConfig::train_fraction));
        add("denoiser", enum_key("denoiser", &RunConfig::denoiser,
                                 {{"oracle", DenoiserKind::oracle}, {"local_linear", DenoiserKind::local_linear}}));
        add("oracle", enum_key("oracle", &RunConfig::oracle,
                               {{"template", OracleKind::template_gaussian}, {"cohort", OracleKind::cohort_mixture}}));
        add("tau2", number_key("tau2", &RunConfig::tau2));
        add("buckets", number_key("buckets", &RunConfig::buckets));
        add("lambda", number_key("lambda", &RunConfig::lambda));
        add("draws_per_volume", number_key("draws_per_volume", &RunConfig::draws_per_volume));
        add("classifier_iterations", number_key("classifier_iterations", &RunConfig::classifier_iterations));
        add("classifier_learning_rate", number_key("classifier_learning_rate", &RunConfig::classifier_learning_rate));
        add("classifier_l2", number_key("classifier_l2", &RunConfig::classifier_l2));
        add("m_suvr", enum_key("m_suvr", &RunConfig::m_suvr,
                               {{"input", SuvrReading::input}, {"anomaly_map", SuvrReading::anomaly_map}}));
        add("render_slice", number_key("render_slice", &RunConfig::render_slice));
        return t;
    }();
    return table;
}

inline const KeyBinding& binding(const std::string& key) {
    for (const auto& [name, b] : key_table())
        if (name == key) return b;
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace detail

/// Cross-key checks; throws ConfigError naming the offending key.
inline void validate(const RunConfig& c) {
    if (c.T < 2) throw ConfigError("config key 'T': must be >= 2");
    if (!(c.beta_start > 0.0 && c.beta_start < c.beta_end && c.beta_end < 1.0))
        throw ConfigError("config keys 'beta_start'/'beta_end': need 0 < beta_start < beta_end < 1");
    if (c.k < 1) throw ConfigError("config key 'k': must be >= 1");
    if (c.t_start < 1 || c.t_start > c.T) throw ConfigError("config key 't_start': must lie in [1, T]");
    if (!(c.nu >= 0.0)) throw ConfigError("config key 'nu': must be >= 0");
    if (c.cfg_scale != 0.0) throw ConfigError("config key 'cfg_scale': only 0 is supported");
    if (c.guidance_t_min < 1 || c.guidance_t_max < c.guidance_t_min)
        throw ConfigError("config keys 'guidance_t_min'/'guidance_t_max': need 1 <= min <= max");
    if (!(c.tau2 >= 0.0)) throw ConfigError("config key 'tau2': must be >= 0");
    if (c.buckets < 1) throw ConfigError("config key 'buckets': must be >= 1");
    if (!(c.lambda > 0.0)) throw ConfigError("config key 'lambda': must be > 0");
    if (c.draws_per_volume < 1) throw ConfigError("config key 'draws_per_volume': must be >= 1");
    if (c.classifier_iterations < 1) throw ConfigError("config key 'classifier_iterations': must be >= 1");
    if (!(c.classifier_learning_rate > 0.0)) throw ConfigError("config key 'classifier_learning_rate': must be > 0");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw ConfigError("config key 'train_fraction': must lie in (0, 1)");
    c.phantom_spec().validate();
}

/// Applies one `key = value` assignment.
inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    detail::binding(key).set(c, value);
}

/// Parses flat `key = value` text; `#` starts a comment. Unknown and repeated keys are rejected.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, int> seen;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
            throw ConfigError(where + ": key '" + key + "' repeated (first on line " + std::to_string(it->second) + ")");
        try {
            set_key(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c;
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const IoError&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    apply_config_text(c, text, path.string());
    return c;
}

/// Every key with its resolved value, in table order; parses back to the same config.
inline std::string resolved_config_text(const RunConfig& c) {
    std::string out = "# resolved configuration\n";
    for (const auto& [name, b] : detail::key_table()) out += name + " = " + b.get(c) + "\n";
    return out;
}

inline void write_resolved_config(const std::filesystem::path& dir, const RunConfig& c) {
    io::atomic_write(dir / "resolved-config", resolved_config_text(c));
}

} // namespace pfode
