#include "tessera/config.hpp"

#include <json.hpp>

namespace tessera {

using nlohmann::ordered_json;

namespace {

int cfg_value_width(const DagNode& n) {
  Interval r{n.df_value[0], n.df_value[0]};
  for (i64 v : n.df_value) {
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  return width_for_range(r);
}

/// Per-dimension strides of the banked layout, as stored in config.
struct AddrStrides {
  Vec sl, sv, sg, local_dims;
  i64 g_total = 1;
};

AddrStrides addr_strides(const DagNode::AddrCfg& cfg) {
  AddrStrides s;
  size_t nd = cfg.g.size();
  s.sl.assign(nd, 1);
  s.sv.assign(nd, 1);
  s.sg.assign(nd, 1);
  s.local_dims.assign(nd, 1);
  for (size_t r = 0; r < nd; ++r) {
    i64 span = cfg.g[r] * cfg.view[r];
    s.local_dims[r] = (cfg.extents[r] + span - 1) / span;
  }
  for (size_t r = nd; r-- > 0;) {
    if (r + 1 < nd) {
      s.sl[r] = s.sl[r + 1] * s.local_dims[r + 1];
      s.sv[r] = s.sv[r + 1] * cfg.view[r + 1];
      s.sg[r] = s.sg[r + 1] * cfg.g[r + 1];
    }
  }
  for (size_t r = 0; r < nd; ++r) s.g_total *= cfg.g[r];
  return s;
}

}  // namespace

std::vector<ConfigField> config_layout(const Dag& dag) {
  std::vector<ConfigField> fields;
  i64 off = 0;
  auto push = [&](const std::string& name, int node, int width) {
    fields.push_back({name, node, off, width, 0});
    off += width;
  };
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    switch (nd.kind) {
      case Prim::ConfigReg:
        push(nd.name, nd.id, std::max(nd.width, cfg_value_width(nd)));
        break;
      case Prim::CompareGE:
        push(nd.name + ".thr", nd.id, cfg_value_width(nd));
        break;
      case Prim::Fifo:
        push(nd.name + ".tap", nd.id, width_for_range({0, nd.depth}));
        break;
      case Prim::Counter:
        for (int j = 0; j < nd.counter_dims; ++j)
          push(nd.name + ".radix" + std::to_string(j), nd.id, kAddrCfgWidth);
        break;
      case Prim::AddressGen: {
        size_t n_d = nd.addr[0].map.n_out() ? size_t(nd.addr[0].map.n_out())
                                            : nd.addr[0].g.size();
        int nt = nd.counter_dims;
        for (size_t r = 0; r < n_d; ++r) {
          for (int c = 0; c < nt; ++c)
            push(nd.name + ".a" + std::to_string(r) + "_" + std::to_string(c),
                 nd.id, kAddrCfgWidth);
          for (const char* suffix : {".b", ".g", ".v", ".sl", ".sv", ".sg"})
            push(nd.name + suffix + std::to_string(r), nd.id, kAddrCfgWidth);
        }
        push(nd.name + ".gt", nd.id, kAddrCfgWidth);
        break;
      }
      case Prim::ConstMatMul: {
        int nin = int(nd.inputs.size());
        for (int c = 0; c < nin; ++c)
          push(nd.name + ".a" + std::to_string(c), nd.id, kAddrCfgWidth);
        push(nd.name + ".b", nd.id, kAddrCfgWidth);
        break;
      }
      default: break;
    }
  }
  return fields;
}

ConfigBlob emit_config(const FusedDesignSpec& spec, const std::string& dataflow,
                       const BankingPlan& banking, const Dag& dag) {
  (void)banking;
  const size_t k = size_t(spec.dataflow_index(dataflow));
  ConfigBlob blob;
  blob.dataflow = dataflow;
  blob.fields = config_layout(dag);
  blob.total_bits = blob.fields.empty()
                        ? 0
                        : blob.fields.back().offset + blob.fields.back().width;

  std::map<std::pair<int, std::string>, i64> values;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    switch (nd.kind) {
      case Prim::ConfigReg: values[{nd.id, nd.name}] = nd.df_value[k]; break;
      case Prim::CompareGE: values[{nd.id, nd.name + ".thr"}] = nd.df_value[k]; break;
      case Prim::Fifo: values[{nd.id, nd.name + ".tap"}] = nd.df_value[k]; break;
      case Prim::Counter:
        for (int j = 0; j < nd.counter_dims; ++j)
          values[{nd.id, nd.name + ".radix" + std::to_string(j)}] =
              nd.df_radix[k][size_t(j)];
        break;
      case Prim::AddressGen: {
        const auto& cfg = nd.addr[k];
        AddrStrides s = addr_strides(cfg);
        size_t n_d = cfg.g.size();
        int nt = nd.counter_dims;
        for (size_t r = 0; r < n_d; ++r) {
          for (int c = 0; c < nt; ++c)
            values[{nd.id, nd.name + ".a" + std::to_string(r) + "_" +
                               std::to_string(c)}] =
                cfg.map.n_in() == nt ? cfg.map.at(int(r), c) : 0;
          values[{nd.id, nd.name + ".b" + std::to_string(r)}] = cfg.map.bias(int(r));
          values[{nd.id, nd.name + ".g" + std::to_string(r)}] = cfg.g[r];
          values[{nd.id, nd.name + ".v" + std::to_string(r)}] = cfg.view[r];
          values[{nd.id, nd.name + ".sl" + std::to_string(r)}] = s.sl[r];
          values[{nd.id, nd.name + ".sv" + std::to_string(r)}] = s.sv[r];
          values[{nd.id, nd.name + ".sg" + std::to_string(r)}] = s.sg[r];
        }
        values[{nd.id, nd.name + ".gt"}] = s.g_total;
        break;
      }
      case Prim::ConstMatMul: {
        const auto& cfg = nd.addr[k];
        for (int c = 0; c < int(nd.inputs.size()); ++c)
          values[{nd.id, nd.name + ".a" + std::to_string(c)}] =
              cfg.active ? cfg.map.at(0, c) : 0;
        values[{nd.id, nd.name + ".b"}] = cfg.active ? cfg.map.bias(0) : 0;
        break;
      }
      default: break;
    }
  }
  for (auto& f : blob.fields) {
    auto it = values.find({f.node, f.name});
    TESSERA_CHECK(it != values.end(), "missing config value for " + f.name);
    f.value = it->second;
  }
  return blob;
}

std::vector<uint8_t> ConfigBlob::bits() const {
  std::vector<uint8_t> out(size_t((total_bits + 7) / 8), 0);
  for (const auto& f : fields) {
    uint64_t raw = uint64_t(f.value) & (f.width >= 64 ? ~0ull
                                                      : ((1ull << f.width) - 1));
    for (int b = 0; b < f.width; ++b)
      if (raw >> b & 1) out[size_t((f.offset + b) / 8)] |= uint8_t(1u << ((f.offset + b) % 8));
  }
  return out;
}

std::string ConfigBlob::to_json() const {
  ordered_json j;
  j["dataflow"] = dataflow;
  j["total_bits"] = total_bits;
  ordered_json fs = ordered_json::array();
  for (const auto& f : fields) {
    ordered_json fj;
    fj["name"] = f.name;
    fj["offset"] = f.offset;
    fj["width"] = f.width;
    fj["value"] = f.value;
    fs.push_back(fj);
  }
  j["fields"] = fs;
  return j.dump(2) + "\n";
}

ConfigBlob ConfigBlob::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ConfigBlob b;
  b.dataflow = j.at("dataflow").get<std::string>();
  b.total_bits = j.at("total_bits").get<i64>();
  for (const auto& fj : j.at("fields")) {
    ConfigField f;
    f.name = fj.at("name").get<std::string>();
    f.offset = fj.at("offset").get<i64>();
    f.width = fj.at("width").get<int>();
    f.value = fj.at("value").get<i64>();
    b.fields.push_back(f);
  }
  return b;
}

}  // namespace tessera
