#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "logcg/logcg.hpp"

namespace logcg::cli {

namespace fs = std::filesystem;

/// Worker count after applying the LOGCG_WORKERS cap; 0 means "all cores".
inline unsigned resolve_workers(unsigned requested) {
  unsigned w = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* cap = std::getenv("LOGCG_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || v < 1) throw InvalidArgument("LOGCG_WORKERS must be a positive integer");
    w = std::min<unsigned>(w, static_cast<unsigned>(v));
  }
  return w;
}

inline void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw FormatError(path, std::string(flag) + ": file not found");
}

struct PlanArgs {
  double d_min = 3.0;
  double d_max = 25.0;
  std::size_t n = 10;

  void add_to(CLI::App* app) {
    app->add_option("--dmin", d_min, "smallest interior diameter (mm)")->capture_default_str();
    app->add_option("--dmax", d_max, "largest interior diameter (mm)")->capture_default_str();
    app->add_option("--n", n, "number of interior scales")->capture_default_str();
  }

  ScalePlan build(std::ostream& err) const {
    ScalePlan p = build_plan(d_min, d_max, n);
    for (const auto& v : validate_plan(p))
      err << "warning: plan " << v.rule << (v.entry ? " at entry " + std::to_string(*v.entry) : "") << ": "
          << v.detail << "\n";
    return p;
  }
};

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multiscale LoG blob candidate generation for 3D volumes"};
  app.require_subcommand(1);

  // plan-scales
  PlanArgs plan_args;
  std::string plan_format = "csv";
  auto* plan_cmd = app.add_subcommand("plan-scales", "print the quantized scale plan");
  plan_args.add_to(plan_cmd);
  plan_cmd->add_option("--format", plan_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();

  // detect
  PlanArgs det_plan;
  std::string det_mode = "solid", det_volume, det_mask, det_out, det_dump;
  std::optional<double> det_threshold, det_window;
  double det_dilate = kLungDilationMM;
  unsigned det_workers = 1;
  auto* det_cmd = app.add_subcommand("detect", "find blob candidates in a volume");
  det_plan.add_to(det_cmd);
  det_cmd->add_option("--mode", det_mode, "solid or nonsolid")
      ->check(CLI::IsMember({"solid", "nonsolid"}))
      ->capture_default_str();
  det_cmd->add_option("--volume", det_volume, "volume header (JSON)")->required();
  det_cmd->add_option("--mask", det_mask, "search mask header (JSON); whole volume if omitted");
  det_cmd->add_option("--out", det_out, "candidate CSV")->required();
  det_cmd->add_option("--threshold", det_threshold, "minimum response (default 226 solid, none nonsolid)");
  det_cmd->add_option("--window", det_window, "nonsolid window level T (default -700)");
  det_cmd->add_option("--dilate", det_dilate, "mask dilation radius (mm)")->capture_default_str();
  det_cmd->add_option("--workers", det_workers, "worker threads (0 = all cores)")->capture_default_str();
  det_cmd->add_option("--dump-responses", det_dump, "directory for per-scale response volumes");

  // phantom
  std::string ph_scene, ph_out;
  int ph_super = 3;
  auto* ph_cmd = app.add_subcommand("phantom", "rasterize a scene description");
  ph_cmd->add_option("--scene", ph_scene, "scene JSON")->required();
  ph_cmd->add_option("--out", ph_out, "volume header to write")->required();
  ph_cmd->add_option("--supersample", ph_super, "sub-samples per axis")->capture_default_str();

  // simulate
  PlanArgs sim_plan;
  std::string sim_mode, sim_out;
  double sim_d = 10.0;
  phantom::SweepOptions sim_opts;
  std::vector<double> sim_distances;
  unsigned sim_workers = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "sphere/cylinder or sphere/wall interference sweep");
  sim_plan.add_to(sim_cmd);
  sim_cmd->add_option("--mode", sim_mode, "cyl or wall")->required()->check(CLI::IsMember({"cyl", "wall"}));
  sim_cmd->add_option("--d", sim_d, "sphere (and cylinder) diameter (mm)")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "sweep CSV")->required();
  sim_cmd->add_option("--size", sim_opts.grid, "voxels per axis")->capture_default_str();
  sim_cmd->add_option("--spacing", sim_opts.spacing_mm, "voxel size (mm)")->capture_default_str();
  sim_cmd->add_option("--supersample", sim_opts.supersample, "sub-samples per axis")->capture_default_str();
  sim_cmd->add_option("--distances", sim_distances, "center distances in diameters, descending")->delimiter(',');
  sim_cmd->add_option("--workers", sim_workers, "worker threads (0 = all cores)")->capture_default_str();

  // evaluate
  std::string ev_truth, ev_cands, ev_volume, ev_json, ev_csv;
  auto* ev_cmd = app.add_subcommand("evaluate", "match candidates against ground truth");
  ev_cmd->add_option("--truth", ev_truth, "ground-truth CSV")->required();
  ev_cmd->add_option("--candidates", ev_cands, "candidate CSV")->required();
  ev_cmd->add_option("--volume", ev_volume, "volume header (for voxel spacing)")->required();
  ev_cmd->add_option("--out-json", ev_json, "report JSON (stdout if omitted)");
  ev_cmd->add_option("--out-csv", ev_csv, "per-nodule CSV");

  // analytic
  double an_d = 10.0, an_smin = 0.5, an_smax = 10.0;
  std::size_t an_steps = 96;
  bool an_summary = false;
  PlanArgs an_plan;
  auto* an_cmd = app.add_subcommand("analytic", "closed-form response curves and design constants");
  an_plan.add_to(an_cmd);
  an_cmd->add_option("--d", an_d, "object diameter (mm)")->capture_default_str();
  an_cmd->add_option("--sigma-min", an_smin, "first sigma (mm)")->capture_default_str();
  an_cmd->add_option("--sigma-max", an_smax, "last sigma (mm)")->capture_default_str();
  an_cmd->add_option("--steps", an_steps, "number of sigma samples")->capture_default_str();
  an_cmd->add_flag("--summary", an_summary, "print quantization constants for the plan instead of curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  using io::fmt4;
  try {
    if (*plan_cmd) {
      const ScalePlan p = plan_args.build(err);
      out << (plan_format == "json" ? io::plan_json(p) : io::plan_csv(p));
    } else if (*det_cmd) {
      require_file(det_volume, "--volume");
      if (!det_mask.empty()) require_file(det_mask, "--mask");
      DetectionConfig cfg = det_mode == "solid" ? DetectionConfig::solid() : DetectionConfig::nonsolid();
      if (det_mode == "solid" && det_window) throw InvalidArgument("--window applies to nonsolid mode only");
      if (det_threshold) cfg.response_threshold = *det_threshold;
      if (det_window) cfg.window_T = *det_window;
      cfg.dilation_radius_mm = det_dilate;
      cfg.workers = resolve_workers(det_workers);
      const ScalePlan p = det_plan.build(err);
      const Volume v = io::read_volume(det_volume);
      const Mask3D mask = det_mask.empty() ? full_mask(v.dims(), v.spacing()) : io::read_mask(det_mask);
      if (!v.same_grid(mask)) throw FormatError(det_mask, "mask dims/spacing do not match the volume");
      if (!det_dump.empty()) {
        fs::create_directories(det_dump);
        cfg.response_observer = [&](std::size_t i, const Volume& r) {
          io::write_volume(fs::path(det_dump) / ("response_" + std::to_string(i) + ".json"), r);
        };
      }
      const auto cands = det_mode == "solid" ? detect_solid(v, mask, p, cfg) : detect_nonsolid(v, mask, p, cfg);
      io::write_candidates(det_out, cands);
      err << cands.size() << " candidates written to " << det_out << "\n";
    } else if (*ph_cmd) {
      require_file(ph_scene, "--scene");
      const auto scene = io::read_scene(ph_scene);
      io::write_volume(ph_out, phantom::rasterize(scene, ph_super, resolve_workers(1)));
    } else if (*sim_cmd) {
      const ScalePlan p = sim_plan.build(err);
      sim_opts.workers = resolve_workers(sim_workers);
      const bool cyl = sim_mode == "cyl";
      if (sim_distances.empty())
        sim_distances = cyl ? phantom::default_cylinder_distances() : phantom::default_wall_distances();
      const auto rows = cyl ? phantom::sweep_sphere_cylinder(sim_d, sim_distances, p, sim_opts)
                            : phantom::sweep_sphere_wall(sim_d, sim_distances, p, sim_opts);
      io::write_text(sim_out, io::sweep_csv(rows));
    } else if (*ev_cmd) {
      require_file(ev_truth, "--truth");
      require_file(ev_cands, "--candidates");
      require_file(ev_volume, "--volume");
      const auto header = io::read_header(ev_volume);
      const auto truth = io::read_truth(ev_truth, header.spacing);
      const auto cands = io::read_candidates(ev_cands);
      const auto report = match(truth, cands);
      const std::string js = io::report_json(report, truth);
      if (ev_json.empty()) out << js;
      else io::write_text(ev_json, js);
      if (!ev_csv.empty()) io::write_text(ev_csv, io::report_csv(report, truth, cands));
    } else if (*an_cmd) {
      if (an_summary) {
        const ScalePlan p = an_plan.build(err);
        const auto q = analytic::quantization_bounds(p.k());
        out << "quantity,value\n";
        out << "k," << fmt4(q.k) << "\n";
        out << "peak_sphere_response," << fmt4(analytic::peak_sphere_response()) << "\n";
        out << "peak_cylinder_response," << fmt4(analytic::peak_cylinder_response()) << "\n";
        out << "dip_response," << fmt4(q.r_dip) << "\n";
        out << "size_error_underestimate," << fmt4(q.d_ue) << "\n";
        out << "size_error_overestimate," << fmt4(q.d_oe) << "\n";
        out << "shape_confusion_ratio," << fmt4(analytic::shape_confusion_ratio()) << "\n";
        out << "solid_threshold,"
            << fmt4(analytic::derive_solid_threshold(analytic::kDefaultInterferenceResponse, q.r_dip,
                                                     analytic::peak_sphere_response(), analytic::kSolidTissueMinHU,
                                                     analytic::kParenchymaHU))
            << "\n";
      } else {
        if (!(an_smin > 0.0) || !(an_smax > an_smin) || an_steps < 2)
          throw InvalidArgument("analytic curves need 0 < sigma-min < sigma-max and steps >= 2");
        out << "sigma_mm,sphere_response,cylinder_response,rect_response_1d\n";
        for (std::size_t i = 0; i < an_steps; ++i) {
          const double s = an_smin + (an_smax - an_smin) * static_cast<double>(i) / static_cast<double>(an_steps - 1);
          out << fmt4(s) << "," << fmt4(analytic::sphere_response(s, an_d)) << ","
              << fmt4(analytic::cylinder_response(s, an_d)) << "," << fmt4(analytic::rect_response_1d(s, an_d))
              << "\n";
        }
      }
    }
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace logcg::cli
