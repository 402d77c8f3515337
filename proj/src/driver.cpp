#include "tessera/driver.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace tessera {

using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (i64 x : v) a.push_back(x);
  return a;
}

/// Wall-clock frame collision guard: with nonzero control delays, ports
/// execute staggered local times; the banked memory serves one address per
/// bank per wall cycle.
void check_wall_frame(const FusedDesignSpec& spec, const InterconnectPlan& plan,
                      const BankingPlan& banking) {
  for (const auto& tp : plan.tensors) {
    const TensorBanking& tb = banking.of(tp.tensor);
    const TensorDecl& decl = spec.workload.tensor(tp.tensor);
    for (size_t k = 0; k < spec.dataflows.size(); ++k) {
      const DataflowSpec& df = spec.dataflows[k];
      bool uniform = std::all_of(df.control.begin(), df.control.end(),
                                 [](i64 c) { return c == 0; });
      if (uniform) continue;  // wall frame equals the logical frame
      std::vector<std::pair<Vec, i64>> nodes;  // (fu, bias)
      i64 max_bias = 0, min_bias = 0;
      for (const auto& [fu, dfs] : tp.data_nodes)
        if (dfs.count(int(k))) {
          i64 b = timestamp_bias(fu, df.control);
          nodes.push_back({fu, b});
          max_bias = std::max(max_bias, b);
          min_bias = std::min(min_bias, b);
        }
      if (nodes.size() < 2) continue;
      AffineMap ts = decl.access.compose(df.map_ts());
      i64 total = vec_product(df.for_sizes);
      for (i64 w = min_bias; w < total + max_bias; ++w) {
        std::map<i64, Vec> seen;
        for (const auto& [fu, bias] : nodes) {
          i64 local = w - bias;
          if (local < 0 || local >= total) continue;
          Vec t = timestamp_vector(local, df.for_sizes);
          Vec p = t;
          p.insert(p.end(), fu.begin(), fu.end());
          Vec d = ts.apply(p);
          i64 bank = bank_of(d, tb.per_df[k]);
          auto [it, fresh] = seen.emplace(bank, d);
          if (!fresh && it->second != d)
            throw SpecError(
                "tensor " + tp.tensor + " dataflow " + df.name +
                ": wall-clock bank collision under systolic control (bank " +
                std::to_string(bank) + " at cycle " + std::to_string(w) +
                "); this memory model cannot serve the design");
        }
      }
    }
  }
}

}  // namespace

Adg run_frontend(const FusedDesignSpec& spec) {
  InterconnectPlan plan = build_plan(spec);
  BankingPlan banking = build_banking(spec, plan);
  auto conflicts = check_bank_conflicts(spec, plan, banking);
  if (!conflicts.empty())
    throw InternalError("bank conflict: " + conflicts.front());
  check_wall_frame(spec, plan, banking);
  std::vector<std::string> diags;
  SwitchFabric fabric = build_switches(spec, plan, banking, &diags);
  return build_adg(spec, std::move(plan), std::move(banking), std::move(fabric));
}

DesignOutputs generate_design(const FusedDesignSpec& spec, const GenerateOptions& opts) {
  DesignOutputs out;
  out.spec = spec;
  out.adg = run_frontend(spec);
  if (opts.dump_adg) out.dumps["adg"] = adg_to_json(out.adg);
  out.raw_dag = codegen(out.adg);
  Dag dag = out.raw_dag;
  out.stage_costs.push_back({"codegen", cost_report(dag)});
  run_pipeline(dag, spec, opts.passes, [&](const std::string& pass, Dag& d) {
    out.stage_costs.push_back({pass, cost_report(d)});
    if (!opts.dump_after.empty() && opts.dump_after == pass)
      out.dumps["after_" + pass] = dag_to_json(d);
  });
  out.dag = std::move(dag);
  if (opts.dump_dag) out.dumps["dag"] = dag_to_json(out.dag);
  return out;
}

std::string analyze_json(const FusedDesignSpec& spec) {
  InterconnectPlan plan = build_plan(spec);
  BankingPlan banking = build_banking(spec, plan);

  ordered_json j;
  ordered_json dfs = ordered_json::array();
  for (size_t k = 0; k < spec.dataflows.size(); ++k) {
    const DataflowSpec& df = spec.dataflows[k];
    ordered_json dj;
    dj["name"] = df.name;
    ordered_json sols = ordered_json::array();
    for (size_t ti = 0; ti < spec.workload.tensors.size(); ++ti)
      for (const auto& s : plan.solutions[k][ti]) {
        ordered_json sj;
        sj["tensor"] = s.tensor;
        sj["kind"] = s.kind == ReuseKind::Direct ? "direct" : "delay";
        sj["delta_s"] = vec_json(s.delta_s);
        sj["delta_t"] = vec_json(s.delta_t);
        sj["depth"] = s.fifo_depth;
        sols.push_back(sj);
      }
    dj["solutions"] = sols;
    ordered_json adjacency = ordered_json::array();
    for (const auto& tp : plan.tensors)
      for (const auto& e : tp.edges) {
        if (!e.per_df[k].active) continue;
        ordered_json ej;
        ej["tensor"] = tp.tensor;
        ej["src"] = vec_json(e.src);
        ej["dst"] = vec_json(e.dst);
        ej["kind"] = e.kind == ReuseKind::Direct ? "direct" : "delay";
        ej["depth"] = e.per_df[k].depth;
        adjacency.push_back(ej);
      }
    dj["edges"] = adjacency;
    dfs.push_back(dj);
  }
  j["dataflows"] = dfs;

  ordered_json tensors = ordered_json::array();
  for (const auto& tp : plan.tensors) {
    ordered_json tj;
    tj["tensor"] = tp.tensor;
    ordered_json nodes = ordered_json::array();
    for (const auto& [fu, set] : tp.data_nodes) {
      ordered_json n;
      n["fu"] = vec_json(fu);
      ordered_json act = ordered_json::array();
      for (int k : set) act.push_back(k);
      n["dataflows"] = act;
      nodes.push_back(n);
    }
    tj["data_nodes"] = nodes;
    tensors.push_back(tj);
  }
  j["interconnect"] = tensors;

  ordered_json bank = ordered_json::array();
  for (const auto& tb : banking.tensors) {
    ordered_json bj;
    bj["tensor"] = tb.tensor;
    ordered_json per = ordered_json::array();
    ordered_json views;
    for (size_t k = 0; k < tb.per_df.size(); ++k) {
      ordered_json p;
      p["B"] = vec_json(tb.per_df[k].B);
      p["g"] = vec_json(tb.per_df[k].g);
      per.push_back(p);
      views[spec.dataflows[k].name] = vec_json(tb.per_df[k].view);
    }
    bj["per_dataflow"] = per;
    // convenience: single-dataflow specs surface B and g at the top level
    bj["B"] = vec_json(tb.per_df[0].B);
    bj["g"] = vec_json(tb.per_df[0].g);
    bj["physical_banks"] = tb.physical_banks;
    bj["views"] = views;
    bank.push_back(bj);
  }
  j["banking"] = bank;
  return j.dump(2) + "\n";
}

// ---- manifest ----------------------------------------------------------------

std::string manifest_json(const std::string& spec_text, const DesignOutputs& out,
                          const std::vector<std::string>& files) {
  ordered_json j;
  j["tool"] = "tessera";
  j["version"] = kToolVersion;
  j["spec_sha256"] = sha256_hex(spec_text);
  ordered_json fs = ordered_json::array();
  for (const auto& f : files) fs.push_back(f);
  j["outputs"] = fs;
  ordered_json stages = ordered_json::array();
  for (const auto& [pass, cost] : out.stage_costs) {
    ordered_json s;
    s["pass"] = pass;
    s["register_bits"] = cost.register_bits;
    s["fifo_bits"] = cost.fifo_bits;
    s["adder_count"] = cost.adder_count;
    s["mul_count"] = cost.mul_count;
    s["mux_count"] = cost.mux_count;
    s["reducer_ports"] = cost.reducer_ports;
    stages.push_back(s);
  }
  j["stages"] = stages;
  return j.dump(2) + "\n";
}

std::string cost_table_text(
    const std::vector<std::pair<std::string, CostReport>>& stages) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "stage" << std::right << std::setw(14)
     << "register_bits" << std::setw(11) << "fifo_bits" << std::setw(8) << "adds"
     << std::setw(8) << "muls" << std::setw(8) << "muxes" << std::setw(10)
     << "red_ports" << "\n";
  for (const auto& [pass, c] : stages)
    os << std::left << std::setw(18) << pass << std::right << std::setw(14)
       << c.register_bits << std::setw(11) << c.fifo_bits << std::setw(8)
       << c.adder_count << std::setw(8) << c.mul_count << std::setw(8)
       << c.mux_count << std::setw(10) << c.reducer_ports << "\n";
  return os.str();
}

// ---- sha256 -------------------------------------------------------------------

namespace {
inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }
}

std::string sha256_hex(const std::string& data) {
  static const uint32_t K[64] = {
      0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
      0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
      0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
      0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
      0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
      0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
      0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
      0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
      0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
      0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
      0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
  uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::string msg = data;
  uint64_t bitlen = uint64_t(msg.size()) * 8;
  msg.push_back(char(0x80));
  while (msg.size() % 64 != 56) msg.push_back(0);
  for (int i = 7; i >= 0; --i) msg.push_back(char((bitlen >> (i * 8)) & 0xff));
  for (size_t off = 0; off < msg.size(); off += 64) {
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(uint8_t(msg[off + i * 4])) << 24) |
             (uint32_t(uint8_t(msg[off + i * 4 + 1])) << 16) |
             (uint32_t(uint8_t(msg[off + i * 4 + 2])) << 8) |
             uint32_t(uint8_t(msg[off + i * 4 + 3]));
    for (int i = 16; i < 64; ++i) {
      uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
             g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      uint32_t ch = (e & f) ^ (~e & g);
      uint32_t t1 = hh + S1 + ch + K[i] + w[i];
      uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      uint32_t mj = (a & b) ^ (a & c) ^ (b & c);
      uint32_t t2 = S0 + mj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }
  std::ostringstream os;
  for (uint32_t x : h) os << std::hex << std::setw(8) << std::setfill('0') << x;
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw SpecError("cannot write " + tmp);
    f << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw SpecError("cannot rename " + tmp + " to " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SpecError("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace tessera
