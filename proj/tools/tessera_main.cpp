#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tessera/driver.hpp"

using namespace tessera;

namespace {

int verbosity() {
  const char* env = std::getenv("TESSERA_LOG");
  return env ? std::atoi(env) : 0;
}

FusedDesignSpec load_spec(const std::string& path, i64 d_s_override) {
  ParseResult r = parse_spec(read_file(path));
  if (!r.ok) {
    for (const auto& d : r.diagnostics) std::cerr << path << ": " << d.str() << "\n";
    throw SpecError("invalid design spec");
  }
  if (verbosity() > 0)
    for (const auto& d : r.diagnostics)
      std::cerr << "warning: " << d.str() << "\n";
  if (d_s_override >= 0) r.spec.hardware.d_s = d_s_override;
  return r.spec;
}

MemoryImage load_inputs(const FusedDesignSpec& spec, const std::string& path,
                        i64 seed) {
  MemoryImage img = MemoryImage::zeros(spec);
  if (!path.empty()) {
    auto j = nlohmann::json::parse(read_file(path));
    for (auto& [name, t] : img.tensors) {
      if (!j.contains(name)) continue;
      // nested integer arrays, row-major
      std::function<void(const nlohmann::json&, Vec&, size_t)> walk =
          [&](const nlohmann::json& node, Vec& idx, size_t dim) {
            if (dim == t.extents.size()) throw SpecError("tensor " + name + " too deep");
            i64 i = 0;
            for (const auto& el : node) {
              idx[dim] = i++;
              if (el.is_array()) walk(el, idx, dim + 1);
              else t.flat[size_t(linearize(idx, t.extents))] = el.get<i64>();
            }
          };
      Vec idx(t.extents.size(), 0);
      walk(j[name], idx, 0);
    }
    return img;
  }
  // seeded pseudo-random inputs in the declared element range
  uint64_t state = uint64_t(seed) * 6364136223846793005ull + 1442695040888963407ull;
  auto next = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (const auto& td : spec.workload.tensors) {
    if (td.role != TensorRole::Input) continue;
    auto& t = img.tensors[td.name];
    i64 lo = td.element_signed ? -(i64(1) << (td.element_width - 1)) : 0;
    i64 hi = td.element_signed ? (i64(1) << (td.element_width - 1)) - 1
                               : (i64(1) << td.element_width) - 1;
    for (auto& x : t.flat) x = lo + i64(next() % uint64_t(hi - lo + 1));
  }
  return img;
}

nlohmann::ordered_json tensor_to_json(const MemoryImage::Tensor& t) {
  std::function<nlohmann::ordered_json(size_t, size_t)> build =
      [&](size_t dim, size_t off) -> nlohmann::ordered_json {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    size_t stride = 1;
    for (size_t d = dim + 1; d < t.extents.size(); ++d) stride *= size_t(t.extents[d]);
    for (i64 i = 0; i < t.extents[dim]; ++i) {
      if (dim + 1 == t.extents.size()) arr.push_back(t.flat[off + size_t(i)]);
      else arr.push_back(build(dim + 1, off + size_t(i) * stride));
    }
    return arr;
  };
  return build(0, 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tessera: spatial tensor-accelerator generator"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "build_out", manifest_path;
  std::string design_path, config_path, input_path, trace_out, sim_out;
  std::string passes_csv, dump_after;
  bool dump_adg = false, dump_dag = false;
  i64 d_s = -1, cycles = -1, seed = 1;

  auto* analyze = app.add_subcommand("analyze", "dump reuse solutions and banking");
  analyze->add_option("--spec", spec_path)->required();
  analyze->add_option("--d-s", d_s);
  analyze->add_option("-o,--out", sim_out);

  auto* generate = app.add_subcommand("generate", "emit Verilog, configs, manifest");
  generate->add_option("--spec", spec_path)->required();
  generate->add_option("--out", out_dir);
  generate->add_option("--passes", passes_csv,
                       "comma list of optional passes (delay matching always runs)");
  generate->add_option("--dump-after", dump_after);
  generate->add_option("--d-s", d_s);
  generate->add_flag("--dump-adg", dump_adg);
  generate->add_flag("--dump-dag", dump_dag);

  auto* simulate_cmd = app.add_subcommand("simulate", "cycle-accurate simulation");
  simulate_cmd->add_option("--spec", spec_path)->required();
  simulate_cmd->add_option("--design", design_path, "final graph json (consistency check)");
  simulate_cmd->add_option("--config", config_path, "config blob sidecar");
  simulate_cmd->add_option("--input", input_path, "tensor json (nested arrays)");
  simulate_cmd->add_option("--cycles", cycles);
  simulate_cmd->add_option("--trace-out", trace_out);
  simulate_cmd->add_option("--seed", seed);
  simulate_cmd->add_option("-o,--out", sim_out);

  auto* report = app.add_subcommand("report", "per-stage cost table");
  report->add_option("--manifest", manifest_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      std::string text = analyze_json(load_spec(spec_path, d_s));
      if (sim_out.empty()) std::cout << text;
      else write_file_atomic(sim_out, text);
      return 0;
    }
    if (*generate) {
      FusedDesignSpec spec = load_spec(spec_path, d_s);
      GenerateOptions opts;
      if (!passes_csv.empty()) {
        opts.passes.clear();
        std::stringstream ss(passes_csv);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty() && item != "delay_match" && item != "infer_bitwidth")
            opts.passes.push_back(item);
      }
      opts.dump_adg = dump_adg;
      opts.dump_dag = dump_dag;
      opts.dump_after = dump_after;
      DesignOutputs out = generate_design(spec, opts);

      std::string mkdir = "mkdir -p " + out_dir;
      if (std::system(mkdir.c_str()) != 0) throw SpecError("cannot create " + out_dir);
      std::vector<std::string> files;
      auto save = [&](const std::string& name, const std::string& content) {
        write_file_atomic(out_dir + "/" + name, content);
        files.push_back(name);
      };
      save("top.v", emit_verilog(out.dag));
      save("design.json", dag_to_json(out.dag));
      for (const auto& df : spec.dataflows)
        save("cfg_" + df.name + ".json",
             emit_config(spec, df.name, out.adg.banking, out.dag).to_json());
      for (const auto& [name, text] : out.dumps) save(name + ".json", text);
      std::string spec_text = read_file(spec_path);
      save("manifest.json", manifest_json(spec_text, out, files));
      std::cout << cost_table_text(out.stage_costs);
      return 0;
    }
    if (*simulate_cmd) {
      FusedDesignSpec spec = load_spec(spec_path, d_s);
      DesignOutputs out = generate_design(spec);
      int df = 0;
      if (!config_path.empty()) {
        ConfigBlob blob = ConfigBlob::from_json(read_file(config_path));
        df = spec.dataflow_index(blob.dataflow);
        ConfigBlob expect = emit_config(spec, blob.dataflow, out.adg.banking, out.dag);
        if (expect.to_json() != blob.to_json())
          throw SpecError("config blob does not match this design");
      }
      if (!design_path.empty()) {
        if (read_file(design_path) != dag_to_json(out.dag))
          throw SpecError("design file does not match this spec");
      }
      MemoryImage inputs = load_inputs(spec, input_path, seed);
      SimResult res = simulate(out.dag, spec, out.adg.banking, df, inputs, cycles,
                               !trace_out.empty());
      nlohmann::ordered_json j;
      j["cycles_run"] = res.cycles_run;
      j["completion_cycle"] = res.completion_cycle;
      for (const auto& [name, t] : res.outputs.tensors)
        j[name] = tensor_to_json(t);
      std::string text = j.dump(2) + "\n";
      if (sim_out.empty()) std::cout << text;
      else write_file_atomic(sim_out, text);
      if (!trace_out.empty()) {
        nlohmann::ordered_json tj;
        for (const auto& [name, count] : res.toggles) tj[name] = count;
        write_file_atomic(trace_out, tj.dump(2) + "\n");
      }
      return 0;
    }
    if (*report) {
      auto j = nlohmann::json::parse(read_file(manifest_path));
      std::vector<std::pair<std::string, CostReport>> stages;
      for (const auto& s : j.at("stages")) {
        CostReport c;
        c.register_bits = s.at("register_bits").get<i64>();
        c.fifo_bits = s.at("fifo_bits").get<i64>();
        c.adder_count = s.at("adder_count").get<i64>();
        c.mul_count = s.at("mul_count").get<i64>();
        c.mux_count = s.at("mux_count").get<i64>();
        c.reducer_ports = s.at("reducer_ports").get<i64>();
        stages.push_back({s.at("pass").get<std::string>(), c});
      }
      std::cout << cost_table_text(stages);
      nlohmann::ordered_json out_json;
      out_json["stages"] = j.at("stages");
      std::cout << out_json.dump(2) << "\n";
      return 0;
    }
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
