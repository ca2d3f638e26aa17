#include "dualline/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dualline {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct Setter {
    std::function<bool(PipelineConfig&, const std::string&)> apply;  // false = bad value
    const char* type_name;
};

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            out = static_cast<T>(std::stod(t, &used));
            return used == t.size();
        } catch (...) {
            return false;
        }
    } else {
        T value{};
        const auto* first = t.data();
        const auto* last = t.data() + t.size();
        const auto res = std::from_chars(first, last, value);
        if (res.ec != std::errc() || res.ptr != last) return false;
        out = value;
        return true;
    }
}

template <typename T, typename Field>
Setter number_setter(Field field, const char* type_name) {
    return Setter{[field](PipelineConfig& cfg, const std::string& text) {
                      T value{};
                      if (!parse_number(text, value)) return false;
                      cfg.*field = value;
                      return true;
                  },
                  type_name};
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["base_steps"] = number_setter<int>(&PipelineConfig::base_steps, "integer");
        t["steps"] = number_setter<int>(&PipelineConfig::steps, "integer");
        t["m1"] = number_setter<int>(&PipelineConfig::m1, "integer");
        t["m2"] = number_setter<int>(&PipelineConfig::m2, "integer");
        t["guidance_semantic"] =
            number_setter<double>(&PipelineConfig::guidance_semantic, "real");
        t["guidance_identity"] =
            number_setter<double>(&PipelineConfig::guidance_identity, "real");
        t["lambda_semantic"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                          return parse_number(s, c.fusion.lambda_semantic);
                                      },
                                      "real"};
        t["lambda_identity"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                          return parse_number(s, c.fusion.lambda_identity);
                                      },
                                      "real"};
        t["pool_factor"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                      return parse_number(s, c.fusion.pool_factor);
                                  },
                                  "integer"};
        t["c_mid"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                return parse_number(s, c.fusion.c_mid);
                            },
                            "integer"};
        t["k"] = number_setter<std::size_t>(&PipelineConfig::agg_tokens, "integer");
        t["token_count"] = number_setter<std::size_t>(&PipelineConfig::token_count, "integer");
        t["token_dim"] = number_setter<std::size_t>(&PipelineConfig::token_dim, "integer");
        t["distractor_rms"] =
            number_setter<double>(&PipelineConfig::distractor_rms, "real");
        t["target_identity"] =
            number_setter<std::size_t>(&PipelineConfig::target_identity, "integer");
        t["target_scene"] =
            number_setter<std::size_t>(&PipelineConfig::target_scene, "integer");
        t["channels"] = number_setter<std::size_t>(&PipelineConfig::channels, "integer");
        t["height"] = number_setter<std::size_t>(&PipelineConfig::height, "integer");
        t["width"] = number_setter<std::size_t>(&PipelineConfig::width, "integer");
        t["num_scenes"] = number_setter<std::size_t>(&PipelineConfig::num_scenes, "integer");
        t["num_identities"] =
            number_setter<std::size_t>(&PipelineConfig::num_identities, "integer");
        t["face_top"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                   return parse_number(s, c.face.top);
                               },
                               "integer"};
        t["face_bottom"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                      return parse_number(s, c.face.bottom);
                                  },
                                  "integer"};
        t["face_left"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                    return parse_number(s, c.face.left);
                                },
                                "integer"};
        t["face_right"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                     return parse_number(s, c.face.right);
                                 },
                                 "integer"};
        t["sigma0_sq"] = number_setter<double>(&PipelineConfig::sigma0_sq, "real");
        t["idap_bias"] = number_setter<double>(&PipelineConfig::idap_bias, "real");
        t["id_variance"] = number_setter<double>(&PipelineConfig::id_variance, "real");
        t["closeup_fill"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                       int v{};
                                       if (!parse_number(s, v) || (v != 0 && v != 1)) return false;
                                       c.closeup_fill = v == 1;
                                       return true;
                                   },
                                   "0 or 1"};
        t["enlarge_factor"] =
            number_setter<std::size_t>(&PipelineConfig::enlarge_factor, "integer");
        t["seed_world"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                     return parse_number(s, c.seeds.world);
                                 },
                                 "integer"};
        t["seed_query"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                     return parse_number(s, c.seeds.query);
                                 },
                                 "integer"};
        t["seed_noise"] = Setter{[](PipelineConfig& c, const std::string& s) {
                                     return parse_number(s, c.seeds.noise);
                                 },
                                 "integer"};
        return t;
    }();
    return table;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig cfg;
    std::vector<std::string> errors;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;

        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line_no) +
                             ": expected `key = value`, got '" + stripped + "'");
            continue;
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            errors.push_back("line " + std::to_string(line_no) + ": unknown key '" +
                             key + "'");
            continue;
        }
        if (!it->second.apply(cfg, value)) {
            errors.push_back("line " + std::to_string(line_no) + ": expected " +
                             it->second.type_name + " for key '" + key + "', got '" +
                             value + "'");
        }
    }

    if (!errors.empty()) {
        std::string msg = "config error";
        for (const auto& e : errors) msg += "; " + e;
        throw std::invalid_argument(msg);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string emit_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "base_steps = " << cfg.base_steps << "\n";
    out << "steps = " << cfg.steps << "\n";
    out << "m1 = " << cfg.m1 << "\n";
    out << "m2 = " << cfg.m2 << "\n";
    out << "guidance_semantic = " << format_double(cfg.guidance_semantic) << "\n";
    out << "guidance_identity = " << format_double(cfg.guidance_identity) << "\n";
    out << "lambda_semantic = " << format_double(cfg.fusion.lambda_semantic) << "\n";
    out << "lambda_identity = " << format_double(cfg.fusion.lambda_identity) << "\n";
    out << "pool_factor = " << cfg.fusion.pool_factor << "\n";
    out << "c_mid = " << cfg.fusion.c_mid << "\n";
    out << "k = " << cfg.agg_tokens << "\n";
    out << "token_count = " << cfg.token_count << "\n";
    out << "token_dim = " << cfg.token_dim << "\n";
    out << "distractor_rms = " << format_double(cfg.distractor_rms) << "\n";
    out << "target_identity = " << cfg.target_identity << "\n";
    out << "target_scene = " << cfg.target_scene << "\n";
    out << "channels = " << cfg.channels << "\n";
    out << "height = " << cfg.height << "\n";
    out << "width = " << cfg.width << "\n";
    out << "num_scenes = " << cfg.num_scenes << "\n";
    out << "num_identities = " << cfg.num_identities << "\n";
    out << "face_top = " << cfg.face.top << "\n";
    out << "face_bottom = " << cfg.face.bottom << "\n";
    out << "face_left = " << cfg.face.left << "\n";
    out << "face_right = " << cfg.face.right << "\n";
    out << "sigma0_sq = " << format_double(cfg.sigma0_sq) << "\n";
    out << "idap_bias = " << format_double(cfg.idap_bias) << "\n";
    out << "id_variance = " << format_double(cfg.id_variance) << "\n";
    out << "closeup_fill = " << (cfg.closeup_fill ? 1 : 0) << "\n";
    out << "enlarge_factor = " << cfg.enlarge_factor << "\n";
    out << "seed_world = " << cfg.seeds.world << "\n";
    out << "seed_query = " << cfg.seeds.query << "\n";
    out << "seed_noise = " << cfg.seeds.noise << "\n";
    return out.str();
}

bool config_equals(const PipelineConfig& a, const PipelineConfig& b) {
    return a.base_steps == b.base_steps && a.steps == b.steps && a.m1 == b.m1 &&
           a.m2 == b.m2 && a.guidance_semantic == b.guidance_semantic &&
           a.guidance_identity == b.guidance_identity &&
           a.fusion.lambda_semantic == b.fusion.lambda_semantic &&
           a.fusion.lambda_identity == b.fusion.lambda_identity &&
           a.fusion.pool_factor == b.fusion.pool_factor &&
           a.fusion.c_mid == b.fusion.c_mid && a.agg_tokens == b.agg_tokens &&
           a.token_count == b.token_count && a.token_dim == b.token_dim &&
           a.distractor_rms == b.distractor_rms &&
           a.target_identity == b.target_identity && a.target_scene == b.target_scene &&
           a.channels == b.channels && a.height == b.height && a.width == b.width &&
           a.num_scenes == b.num_scenes && a.num_identities == b.num_identities &&
           a.face.top == b.face.top && a.face.bottom == b.face.bottom &&
           a.face.left == b.face.left && a.face.right == b.face.right &&
           a.sigma0_sq == b.sigma0_sq && a.idap_bias == b.idap_bias &&
           a.id_variance == b.id_variance && a.closeup_fill == b.closeup_fill &&
           a.enlarge_factor == b.enlarge_factor &&
           a.seeds.world == b.seeds.world && a.seeds.query == b.seeds.query &&
           a.seeds.noise == b.seeds.noise;
}

}  // namespace dualline
