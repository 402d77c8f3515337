#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tessera/driver.hpp"

namespace py = pybind11;
using namespace tessera;

namespace {

FusedDesignSpec parse_or_raise(const std::string& text) {
  ParseResult r = parse_spec(text);
  if (!r.ok) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += d.str() + "\n";
    throw std::invalid_argument(msg);
  }
  return r.spec;
}

MemoryImage image_from_dict(const FusedDesignSpec& spec, const py::dict& d) {
  MemoryImage img = MemoryImage::zeros(spec);
  for (auto item : d) {
    std::string name = py::cast<std::string>(item.first);
    auto& t = img.tensors.at(name);
    py::list flat = py::cast<py::list>(item.second);
    if (py::len(flat) != t.flat.size())
      throw std::invalid_argument("tensor " + name + " must be a flat list of " +
                                  std::to_string(t.flat.size()) + " ints");
    for (size_t i = 0; i < t.flat.size(); ++i)
      t.flat[i] = py::cast<i64>(flat[i]);
  }
  return img;
}

py::dict image_to_dict(const MemoryImage& img) {
  py::dict out;
  for (const auto& [name, t] : img.tensors) {
    py::list flat;
    for (i64 v : t.flat) flat.append(v);
    py::list ext;
    for (i64 v : t.extents) ext.append(v);
    py::dict entry;
    entry["extents"] = ext;
    entry["data"] = flat;
    out[py::str(name)] = entry;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_tessera, m) {
  m.doc() = "spatial tensor-accelerator generator core";
  m.attr("__version__") = kToolVersion;

  m.def("validate_spec", [](const std::string& text) {
    parse_or_raise(text);
    return true;
  });
  m.def("canonical_spec", [](const std::string& text) {
    return serialize_spec(parse_or_raise(text));
  });
  m.def("analyze_json",
        [](const std::string& text) { return analyze_json(parse_or_raise(text)); });
  m.def("generate", [](const std::string& text) {
    FusedDesignSpec spec = parse_or_raise(text);
    DesignOutputs out = generate_design(spec);
    py::dict res;
    res["verilog"] = emit_verilog(out.dag);
    py::dict cfgs;
    for (const auto& df : spec.dataflows)
      cfgs[py::str(df.name)] =
          emit_config(spec, df.name, out.adg.banking, out.dag).to_json();
    res["configs"] = cfgs;
    res["manifest"] = manifest_json(text, out, {});
    res["dag"] = dag_to_json(out.dag);
    return res;
  });
  m.def(
      "simulate",
      [](const std::string& text, int dataflow, const py::dict& inputs, i64 cycles) {
        FusedDesignSpec spec = parse_or_raise(text);
        DesignOutputs out = generate_design(spec);
        MemoryImage img = image_from_dict(spec, inputs);
        SimResult res =
            simulate(out.dag, spec, out.adg.banking, dataflow, img, cycles);
        py::dict r = image_to_dict(res.outputs);
        r["completion_cycle"] = res.completion_cycle;
        return r;
      },
      py::arg("spec"), py::arg("dataflow") = 0, py::arg("inputs") = py::dict(),
      py::arg("cycles") = -1);
  m.def("reference_execute",
        [](const std::string& text, const py::dict& inputs) {
          FusedDesignSpec spec = parse_or_raise(text);
          return image_to_dict(reference_execute(spec, image_from_dict(spec, inputs)));
        });
  m.def("estimate_performance", [](const std::string& text, int dataflow) {
    FusedDesignSpec spec = parse_or_raise(text);
    DesignOutputs out = generate_design(spec);
    return estimate_performance(out.dag, spec, dataflow);
  });
  m.def("cost_report", [](const std::string& text) {
    FusedDesignSpec spec = parse_or_raise(text);
    DesignOutputs out = generate_design(spec);
    py::dict r;
    CostReport c = cost_report(out.dag);
    r["register_bits"] = c.register_bits;
    r["fifo_bits"] = c.fifo_bits;
    r["adder_count"] = c.adder_count;
    r["mul_count"] = c.mul_count;
    r["mux_count"] = c.mux_count;
    r["reducer_ports"] = c.reducer_ports;
    return r;
  });
}
