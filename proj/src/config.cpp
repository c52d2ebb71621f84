#include "venibot/config.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace venibot::config {

namespace {

using json_io::check_keys;
using json_io::ordered_json;
using json_io::read;

ordered_json range_json(synth::Range r) { return ordered_json::array({r.lo, r.hi}); }

void read_range(const ordered_json& j, const char* key, synth::Range& r, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + ": expected [lo, hi]");
  r = {v[0].get<double>(), v[1].get<double>()};
}

ordered_json rules_json(const geometry::SuitabilityRules& r) {
  return {{"min_length_px", r.min_length_px},
          {"max_mean_turning_deg_per_px", r.max_mean_turning_deg_per_px},
          {"edge_margin_px", r.edge_margin_px},
          {"min_diameter_px", r.min_diameter_px}};
}

geometry::SuitabilityRules rules_from(const ordered_json& j, const std::string& w) {
  check_keys(j, w, {"min_length_px", "max_mean_turning_deg_per_px", "edge_margin_px", "min_diameter_px"});
  geometry::SuitabilityRules r;
  read(j, "min_length_px", r.min_length_px, w);
  read(j, "max_mean_turning_deg_per_px", r.max_mean_turning_deg_per_px, w);
  read(j, "edge_margin_px", r.edge_margin_px, w);
  read(j, "min_diameter_px", r.min_diameter_px, w);
  return r;
}

ordered_json synth_json(const synth::VeinTreeSpec& s) {
  ordered_json j{{"seed", s.seed},
                 {"width", s.width},
                 {"height", s.height},
                 {"trunk_count", s.trunk_count},
                 {"trunk_angle_deg", s.trunk_angle_deg ? ordered_json(*s.trunk_angle_deg) : ordered_json(nullptr)},
                 {"trunk_angle_range", range_json(s.trunk_angle_range)},
                 {"bifurcation_prob", s.bifurcation_prob},
                 {"max_branch_depth", s.max_branch_depth},
                 {"curvature_deg_per_px", range_json(s.curvature_deg_per_px)},
                 {"diameter_px", range_json(s.diameter_px)},
                 {"segment_length_px", range_json(s.segment_length_px)},
                 {"branch_angle_deg", range_json(s.branch_angle_deg)},
                 {"branch_diameter_ratio", range_json(s.branch_diameter_ratio)},
                 {"background", s.background},
                 {"vein_core", s.vein_core},
                 {"hair_count", s.hair_count},
                 {"blemish_count", s.blemish_count},
                 {"vignette", s.vignette},
                 {"sensor_noise_sigma", s.sensor_noise_sigma},
                 {"rules", rules_json(s.rules)},
                 {"max_retries", s.max_retries}};
  return j;
}

synth::VeinTreeSpec synth_from(const ordered_json& j) {
  const std::string w = "synth";
  check_keys(j, w,
             {"seed", "width", "height", "trunk_count", "trunk_angle_deg", "trunk_angle_range", "bifurcation_prob",
              "max_branch_depth", "curvature_deg_per_px", "diameter_px", "segment_length_px", "branch_angle_deg",
              "branch_diameter_ratio", "background", "vein_core", "hair_count", "blemish_count", "vignette",
              "sensor_noise_sigma", "rules", "max_retries"});
  synth::VeinTreeSpec s;
  read(j, "seed", s.seed, w);
  read(j, "width", s.width, w);
  read(j, "height", s.height, w);
  read(j, "trunk_count", s.trunk_count, w);
  if (j.contains("trunk_angle_deg") && !j.at("trunk_angle_deg").is_null()) {
    double a = 0.0;
    read(j, "trunk_angle_deg", a, w);
    s.trunk_angle_deg = a;
  }
  read_range(j, "trunk_angle_range", s.trunk_angle_range, w);
  read(j, "bifurcation_prob", s.bifurcation_prob, w);
  read(j, "max_branch_depth", s.max_branch_depth, w);
  read_range(j, "curvature_deg_per_px", s.curvature_deg_per_px, w);
  read_range(j, "diameter_px", s.diameter_px, w);
  read_range(j, "segment_length_px", s.segment_length_px, w);
  read_range(j, "branch_angle_deg", s.branch_angle_deg, w);
  read_range(j, "branch_diameter_ratio", s.branch_diameter_ratio, w);
  read(j, "background", s.background, w);
  read(j, "vein_core", s.vein_core, w);
  read(j, "hair_count", s.hair_count, w);
  read(j, "blemish_count", s.blemish_count, w);
  read(j, "vignette", s.vignette, w);
  read(j, "sensor_noise_sigma", s.sensor_noise_sigma, w);
  if (j.contains("rules")) s.rules = rules_from(j.at("rules"), w + ".rules");
  read(j, "max_retries", s.max_retries, w);
  return s;
}

ordered_json label_json(const vision::LabelPipelineParams& p) {
  return {{"gaussian_sigma", p.gaussian_sigma},
          {"erode_radius", p.erode_radius},
          {"dilate_radius", p.dilate_radius},
          {"brightness_gain", p.brightness_gain},
          {"vesselness_scales", p.vesselness_scales},
          {"vesselness_beta", p.vesselness_beta},
          {"vesselness_c_fraction", p.vesselness_c_fraction},
          {"polarity", p.polarity == vision::VesselPolarity::kDarkOnBright ? "dark_on_bright" : "bright_on_dark"},
          {"threshold", p.threshold},
          {"min_component_area", p.min_component_area}};
}

vision::LabelPipelineParams label_from(const ordered_json& j) {
  const std::string w = "label";
  check_keys(j, w,
             {"gaussian_sigma", "erode_radius", "dilate_radius", "brightness_gain", "vesselness_scales",
              "vesselness_beta", "vesselness_c_fraction", "polarity", "threshold", "min_component_area"});
  vision::LabelPipelineParams p;
  read(j, "gaussian_sigma", p.gaussian_sigma, w);
  read(j, "erode_radius", p.erode_radius, w);
  read(j, "dilate_radius", p.dilate_radius, w);
  read(j, "brightness_gain", p.brightness_gain, w);
  read(j, "vesselness_scales", p.vesselness_scales, w);
  read(j, "vesselness_beta", p.vesselness_beta, w);
  read(j, "vesselness_c_fraction", p.vesselness_c_fraction, w);
  if (j.contains("polarity")) {
    std::string s;
    read(j, "polarity", s, w);
    if (s == "dark_on_bright")
      p.polarity = vision::VesselPolarity::kDarkOnBright;
    else if (s == "bright_on_dark")
      p.polarity = vision::VesselPolarity::kBrightOnDark;
    else
      throw ConfigError("label.polarity: expected dark_on_bright or bright_on_dark");
  }
  read(j, "threshold", p.threshold, w);
  read(j, "min_component_area", p.min_component_area, w);
  return p;
}

ordered_json augment_json(const augment::AugmentPolicy& p) {
  return {{"p_vflip", p.p_vflip},
          {"p_hflip", p.p_hflip},
          {"crop_scale", range_json(p.crop_scale)},
          {"aspect_ratio", range_json(p.aspect_ratio)},
          {"rotation_deg", range_json(p.rotation_deg)},
          {"brightness", range_json(p.brightness)},
          {"contrast", range_json(p.contrast)},
          {"saturation", range_json(p.saturation)}};
}

augment::AugmentPolicy augment_from(const ordered_json& j) {
  const std::string w = "augment";
  check_keys(j, w,
             {"p_vflip", "p_hflip", "crop_scale", "aspect_ratio", "rotation_deg", "brightness", "contrast",
              "saturation"});
  augment::AugmentPolicy p;
  read(j, "p_vflip", p.p_vflip, w);
  read(j, "p_hflip", p.p_hflip, w);
  read_range(j, "crop_scale", p.crop_scale, w);
  read_range(j, "aspect_ratio", p.aspect_ratio, w);
  read_range(j, "rotation_deg", p.rotation_deg, w);
  read_range(j, "brightness", p.brightness, w);
  read_range(j, "contrast", p.contrast, w);
  read_range(j, "saturation", p.saturation, w);
  return p;
}

ordered_json train_json(const train::TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"iterations", t.iterations},
          {"val_interval", t.val_interval},
          {"plateau_factor", t.plateau_factor},
          {"plateau_patience", t.plateau_patience},
          {"seed", t.seed},
          {"augment_step1", t.augment_step1},
          {"augment_step2", t.augment_step2},
          {"threshold", t.threshold}};
}

void train_from(const ordered_json& j, train::TrainConfig& t) {
  const std::string w = "train";
  check_keys(j, w,
             {"batch_size", "lr", "weight_decay", "iterations", "val_interval", "plateau_factor",
              "plateau_patience", "seed", "augment_step1", "augment_step2", "threshold"});
  read(j, "batch_size", t.batch_size, w);
  read(j, "lr", t.lr, w);
  read(j, "weight_decay", t.weight_decay, w);
  read(j, "iterations", t.iterations, w);
  read(j, "val_interval", t.val_interval, w);
  read(j, "plateau_factor", t.plateau_factor, w);
  read(j, "plateau_patience", t.plateau_patience, w);
  read(j, "seed", t.seed, w);
  read(j, "augment_step1", t.augment_step1, w);
  read(j, "augment_step2", t.augment_step2, w);
  read(j, "threshold", t.threshold, w);
}

ordered_json calibration_json(const planner::Calibration& c) {
  return {{"sx_mm_per_px", c.sx_mm_per_px}, {"sy_mm_per_px", c.sy_mm_per_px}, {"tx_mm", c.tx_mm},
          {"ty_mm", c.ty_mm},               {"rotation_deg", c.rotation_deg}, {"image_width", c.image_width},
          {"image_height", c.image_height}};
}

planner::Calibration calibration_from(const ordered_json& j) {
  const std::string w = "calibration";
  check_keys(j, w, {"sx_mm_per_px", "sy_mm_per_px", "tx_mm", "ty_mm", "rotation_deg", "image_width", "image_height"});
  planner::Calibration c;
  read(j, "sx_mm_per_px", c.sx_mm_per_px, w);
  read(j, "sy_mm_per_px", c.sy_mm_per_px, w);
  read(j, "tx_mm", c.tx_mm, w);
  read(j, "ty_mm", c.ty_mm, w);
  read(j, "rotation_deg", c.rotation_deg, w);
  read(j, "image_width", c.image_width, w);
  read(j, "image_height", c.image_height, w);
  return c;
}

ordered_json limits_json(const planner::WorkspaceLimits& l) {
  auto r = [](planner::AxisRange a) { return ordered_json::array({a.min, a.max}); };
  return {{"motor1_y_mm", r(l.motor1_y_mm)},
          {"motor3_x_mm", r(l.motor3_x_mm)},
          {"motor2_z_mm", r(l.motor2_z_mm)},
          {"motor4_max_abs_deg", l.motor4_max_abs_deg},
          {"travel_height_mm", l.travel_height_mm}};
}

planner::WorkspaceLimits limits_from(const ordered_json& j) {
  const std::string w = "limits";
  check_keys(j, w, {"motor1_y_mm", "motor3_x_mm", "motor2_z_mm", "motor4_max_abs_deg", "travel_height_mm"});
  planner::WorkspaceLimits l;
  auto axis = [&](const char* key, planner::AxisRange& a) {
    synth::Range r{a.min, a.max};
    read_range(j, key, r, w);
    a = {r.lo, r.hi};
  };
  axis("motor1_y_mm", l.motor1_y_mm);
  axis("motor3_x_mm", l.motor3_x_mm);
  axis("motor2_z_mm", l.motor2_z_mm);
  read(j, "motor4_max_abs_deg", l.motor4_max_abs_deg, w);
  read(j, "travel_height_mm", l.travel_height_mm, w);
  return l;
}

ordered_json motion_json(const planner::MotionConfig& m) {
  return {{"vmax_mm_s", m.vmax_mm_s},
          {"amax_mm_s2", m.amax_mm_s2},
          {"vmax_deg_s", m.vmax_deg_s},
          {"amax_deg_s2", m.amax_deg_s2},
          {"sample_ms", m.sample_ms}};
}

planner::MotionConfig motion_from(const ordered_json& j) {
  const std::string w = "motion";
  check_keys(j, w, {"vmax_mm_s", "amax_mm_s2", "vmax_deg_s", "amax_deg_s2", "sample_ms"});
  planner::MotionConfig m;
  read(j, "vmax_mm_s", m.vmax_mm_s, w);
  read(j, "amax_mm_s2", m.amax_mm_s2, w);
  read(j, "vmax_deg_s", m.vmax_deg_s, w);
  read(j, "amax_deg_s2", m.amax_deg_s2, w);
  read(j, "sample_ms", m.sample_ms, w);
  return m;
}

ordered_json parse_text(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  label.validate();
  arch.validate();
  train.validate();
  calibration.validate();
  limits.validate();
  motion.validate();
  if (volunteers < 1 || images_per_volunteer < 1) throw ConfigError("corpus: volunteers and images must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (contact_height_mm < limits.motor2_z_mm.min || contact_height_mm > limits.travel_height_mm)
    throw ConfigError("contact_height_mm must lie between the motor2 minimum and the travel height");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const auto j = parse_text(text);
  check_keys(j, "config",
             {"synth", "corpus", "label", "augment", "arch", "topology", "train", "evaluation", "calibration", "limits",
              "motion", "contact_height_mm", "manifest", "output_dir"});
  RunConfig c;
  try {
    if (j.contains("synth")) c.synth = synth_from(j.at("synth"));
    if (j.contains("corpus")) {
      const auto& k = j.at("corpus");
      check_keys(k, "corpus", {"volunteers", "images_per_volunteer"});
      read(k, "volunteers", c.volunteers, "corpus");
      read(k, "images_per_volunteer", c.images_per_volunteer, "corpus");
    }
    if (j.contains("label")) c.label = label_from(j.at("label"));
    if (j.contains("augment")) c.train.policy = augment_from(j.at("augment"));
    if (j.contains("arch")) c.arch = json_io::arch_from_json(j.at("arch"));
    if (j.contains("topology")) {
      std::string t;
      read(j, "topology", t, "config");
      c.topology = model::parse_topology(t);
    }
    if (j.contains("train")) train_from(j.at("train"), c.train);
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, "evaluation", {"fold_seed", "folds", "single_precision"});
      read(e, "fold_seed", c.fold_seed, "evaluation");
      read(e, "folds", c.folds, "evaluation");
      read(e, "single_precision", c.single_precision, "evaluation");
    }
    if (j.contains("calibration")) c.calibration = calibration_from(j.at("calibration"));
    if (j.contains("limits")) c.limits = limits_from(j.at("limits"));
    if (j.contains("motion")) c.motion = motion_from(j.at("motion"));
    read(j, "contact_height_mm", c.contact_height_mm, "config");
    std::string p;
    if (j.contains("manifest")) {
      read(j, "manifest", p, "config");
      c.manifest = p;
    }
    if (j.contains("output_dir")) {
      read(j, "output_dir", p, "config");
      c.output_dir = p;
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (c.manifest.is_relative()) c.manifest = base_dir / c.manifest;
  if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string dump_run_config(const RunConfig& c, const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(base_dir).generic_string(); };
  ordered_json j{{"synth", synth_json(c.synth)},
                 {"corpus", {{"volunteers", c.volunteers}, {"images_per_volunteer", c.images_per_volunteer}}},
                 {"label", label_json(c.label)},
                 {"augment", augment_json(c.train.policy)},
                 {"arch", json_io::to_json(c.arch)},
                 {"topology", model::to_string(c.topology)},
                 {"train", train_json(c.train)},
                 {"evaluation",
                  {{"fold_seed", c.fold_seed}, {"folds", c.folds}, {"single_precision", c.single_precision}}},
                 {"calibration", calibration_json(c.calibration)},
                 {"limits", limits_json(c.limits)},
                 {"motion", motion_json(c.motion)},
                 {"contact_height_mm", c.contact_height_mm},
                 {"manifest", rel(c.manifest)},
                 {"output_dir", rel(c.output_dir)}};
  return j.dump(2) + "\n";
}

vision::LabelPipelineParams parse_label_params(const std::string& text) {
  auto p = label_from(parse_text(text));
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

planner::Calibration parse_calibration(const std::string& text) {
  auto c = calibration_from(parse_text(text));
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace venibot::config
