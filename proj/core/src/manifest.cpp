#include "dualline/manifest.hpp"

#include "dualline/config.hpp"
#include "dualline/schedule.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dualline {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json config_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["base_steps"] = cfg.base_steps;
    j["steps"] = cfg.steps;
    j["m1"] = cfg.m1;
    j["m2"] = cfg.m2;
    j["guidance_semantic"] = cfg.guidance_semantic;
    j["guidance_identity"] = cfg.guidance_identity;
    j["lambda_semantic"] = cfg.fusion.lambda_semantic;
    j["lambda_identity"] = cfg.fusion.lambda_identity;
    j["pool_factor"] = cfg.fusion.pool_factor;
    j["c_mid"] = cfg.fusion.c_mid;
    j["k"] = cfg.agg_tokens;
    j["token_count"] = cfg.token_count;
    j["token_dim"] = cfg.token_dim;
    j["distractor_rms"] = cfg.distractor_rms;
    j["target_identity"] = cfg.target_identity;
    j["target_scene"] = cfg.target_scene;
    j["channels"] = cfg.channels;
    j["height"] = cfg.height;
    j["width"] = cfg.width;
    j["num_scenes"] = cfg.num_scenes;
    j["num_identities"] = cfg.num_identities;
    j["face_top"] = cfg.face.top;
    j["face_bottom"] = cfg.face.bottom;
    j["face_left"] = cfg.face.left;
    j["face_right"] = cfg.face.right;
    j["sigma0_sq"] = cfg.sigma0_sq;
    j["idap_bias"] = cfg.idap_bias;
    j["id_variance"] = cfg.id_variance;
    j["closeup_fill"] = cfg.closeup_fill ? 1 : 0;
    j["enlarge_factor"] = cfg.enlarge_factor;
    j["seed_world"] = cfg.seeds.world;
    j["seed_query"] = cfg.seeds.query;
    j["seed_noise"] = cfg.seeds.noise;
    return j;
}

ordered_json schedule_json(const PipelineConfig& cfg) {
    const NoiseSchedule s = NoiseSchedule::make(cfg.base_steps, cfg.steps);
    ordered_json j;
    j["base_steps"] = s.base_steps;
    j["sample_steps"] = s.sample_steps;
    j["beta_start"] = s.betas.front();
    j["beta_end"] = s.betas.back();
    j["first_base_index"] = s.step_indices.front();
    j["last_base_index"] = s.step_indices.back();
    return j;
}

}  // namespace

std::string run_manifest_json(const PipelineConfig& cfg, const RunResult& result,
                              double id_score, double sem_score,
                              const std::map<std::string, double>& output_vmax) {
    ordered_json j;
    j["version"] = kSoftwareVersion;
    j["command"] = "sample";
    j["config"] = config_json(cfg);
    j["schedule"] = schedule_json(cfg);

    ordered_json run;
    run["steps"] = result.trace.size();
    int idaf_steps = 0, idap_steps = 0;
    ordered_json fractions = ordered_json::array();
    for (const auto& rec : result.trace) {
        idaf_steps += rec.idaf_active ? 1 : 0;
        idap_steps += rec.idap_active ? 1 : 0;
        fractions.push_back(rec.identity_fraction);
    }
    run["idaf_active_steps"] = idaf_steps;
    run["idap_active_steps"] = idap_steps;
    if (result.decoded_identity) {
        run["decoded_identity"] = *result.decoded_identity;
    } else {
        run["decoded_identity"] = nullptr;
    }
    run["mean_identity_fraction"] = result.mean_identity_fraction();
    run["identity_score"] = id_score;
    run["semantic_score"] = sem_score;
    run["identity_fraction_per_step"] = fractions;
    j["run"] = run;

    ordered_json outputs;
    for (const auto& [name, vmax] : output_vmax) {
        ordered_json entry;
        entry["vmax"] = vmax;
        outputs[name] = entry;
    }
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

std::string sweep_manifest_json(const std::string& command, const PipelineConfig& base,
                                const std::vector<std::string>& cells,
                                std::uint64_t seed_count,
                                const std::vector<std::string>& files) {
    ordered_json j;
    j["version"] = kSoftwareVersion;
    j["command"] = command;
    j["config"] = config_json(base);
    j["schedule"] = schedule_json(base);
    j["cells"] = cells;
    j["seed_count"] = seed_count;
    j["files"] = files;
    return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("io: cannot write '" + path + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("io: short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("io: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

}  // namespace dualline
