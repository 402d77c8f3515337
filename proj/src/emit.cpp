#include "tessera/emit.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tessera {

namespace {

std::string wname(const DagNode& n, int pin = 0) {
  if (n.kind == Prim::Counter && pin >= 0) {
    if (pin < n.counter_dims) return "w_" + n.name + "_t" + std::to_string(pin);
    if (pin == n.counter_dims) return "w_" + n.name + "_running";
    return "w_" + n.name + "_scalar";
  }
  return "w_" + n.name;
}

int out_w(const DagNode& n, int pin = 0) {
  if (n.kind == Prim::Counter) return n.pin_widths[size_t(pin)];
  return std::max(n.width, 1);
}

bool out_signed(const DagNode& n, int pin = 0) {
  if (n.kind == Prim::Counter) return n.pin_ranges[size_t(pin)].lo < 0;
  return n.range.lo < 0;
}

std::string dec(i64 v) { return std::to_string(v); }

/// Sign-correct width adaptation of a source expression.
std::string adapt(const Dag& dag, PinRef in, int want_width) {
  const DagNode& src = dag.node(in.node);
  int have = out_w(src, in.pin);
  std::string e = wname(src, in.pin);
  if (have == want_width) return e;
  if (out_signed(src, in.pin))
    return "$signed(" + e + ")";  // consumer context extends
  return e;  // zero extension is implicit
}

}  // namespace

std::string emit_verilog(const Dag& dag) {
  {
    auto issues = check_wellformed(dag);
    if (!issues.empty())
      throw InternalError("refusing to emit ill-formed graph: " + issues.front());
    for (const auto& nd : dag.nodes)
      if (!nd.dead && nd.width == 0 && nd.kind != Prim::MemWrite &&
          nd.kind != Prim::Counter && nd.kind != Prim::OutPort)
        throw InternalError("emit: node " + nd.name + " has no inferred width");
  }

  std::vector<ConfigField> layout = config_layout(dag);
  i64 cfg_bits = layout.empty() ? 1 : layout.back().offset + layout.back().width;
  std::map<std::pair<int, std::string>, const ConfigField*> field_of;
  for (const auto& f : layout) field_of[{f.node, f.name}] = &f;
  auto cfg_slice = [&](const DagNode& n, const std::string& name) {
    const ConfigField* f = field_of.at({n.id, name});
    return "cfg[" + dec(f->offset + f->width - 1) + ":" + dec(f->offset) + "]";
  };

  // ---- gather used leaf kinds ------------------------------------------------
  std::set<std::string> kinds;
  std::set<size_t> reducer_arities;
  std::set<int> mux_arities;
  bool any_counter = false, any_addrgen = false, any_matmul = false;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    switch (nd.kind) {
      case Prim::Delay: if (nd.depth > 0) kinds.insert("delay"); break;
      case Prim::Fifo: kinds.insert("fifo"); break;
      case Prim::Mul: kinds.insert("mul"); break;
      case Prim::Add: kinds.insert("add"); break;
      case Prim::ShiftLeft: kinds.insert("shl"); break;
      case Prim::CompareGE: kinds.insert("cmpge"); break;
      case Prim::Mux: mux_arities.insert(int(nd.inputs.size()) - 1); break;
      case Prim::Reducer: reducer_arities.insert(nd.inputs.size()); break;
      case Prim::MemRead:
      case Prim::MemWrite: kinds.insert("membank"); break;
      case Prim::Counter: any_counter = true; break;
      case Prim::AddressGen: any_addrgen = true; break;
      case Prim::ConstMatMul: any_matmul = true; break;
      default: break;
    }
  }

  std::ostringstream v;
  v << "// generated structural netlist; single clock, synchronous "
       "active-high reset\n";
  v << "// config is loaded through the flat cfg vector (see the blob "
       "sidecar for the field map)\n\n";

  // ---- leaf modules ----------------------------------------------------------
  if (kinds.count("delay"))
    v << "module tessera_delay #(parameter WIDTH = 8, DEPTH = 1) (\n"
         "  input clk, input rst, input en,\n"
         "  input [WIDTH-1:0] d, output [WIDTH-1:0] q);\n"
         "  reg [WIDTH-1:0] st [0:DEPTH-1];\n"
         "  integer i;\n"
         "  always @(posedge clk) begin\n"
         "    if (rst) begin\n"
         "      for (i = 0; i < DEPTH; i = i + 1) st[i] <= {WIDTH{1'b0}};\n"
         "    end else if (en) begin\n"
         "      st[0] <= d;\n"
         "      for (i = 1; i < DEPTH; i = i + 1) st[i] <= st[i-1];\n"
         "    end\n"
         "  end\n"
         "  assign q = st[DEPTH-1];\n"
         "endmodule\n\n";
  if (kinds.count("fifo"))
    v << "module tessera_fifo #(parameter WIDTH = 8, DEPTH = 1, TAPW = 1) (\n"
         "  input clk, input rst, input en,\n"
         "  input [WIDTH-1:0] d, input [TAPW-1:0] tap,\n"
         "  output [WIDTH-1:0] q);\n"
         "  reg [WIDTH-1:0] st [0:DEPTH-1];\n"
         "  integer i;\n"
         "  always @(posedge clk) begin\n"
         "    if (rst) begin\n"
         "      for (i = 0; i < DEPTH; i = i + 1) st[i] <= {WIDTH{1'b0}};\n"
         "    end else if (en) begin\n"
         "      st[0] <= d;\n"
         "      for (i = 1; i < DEPTH; i = i + 1) st[i] <= st[i-1];\n"
         "    end\n"
         "  end\n"
         "  assign q = st[tap-1];\n"
         "endmodule\n\n";
  if (kinds.count("mul"))
    v << "module tessera_mul #(parameter WA = 8, WB = 8, WO = 16) (\n"
         "  input clk, input rst,\n"
         "  input signed [WA-1:0] a, input signed [WB-1:0] b,\n"
         "  output reg signed [WO-1:0] y);\n"
         "  always @(posedge clk) begin\n"
         "    if (rst) y <= {WO{1'b0}};\n"
         "    else y <= a * b;\n"
         "  end\n"
         "endmodule\n\n";
  if (kinds.count("add"))
    v << "module tessera_add #(parameter WA = 8, WB = 8, WO = 16) (\n"
         "  input signed [WA-1:0] a, input signed [WB-1:0] b,\n"
         "  output signed [WO-1:0] y);\n"
         "  assign y = a + b;\n"
         "endmodule\n\n";
  if (kinds.count("shl"))
    v << "module tessera_shl #(parameter WA = 8, WB = 4, WO = 16) (\n"
         "  input signed [WA-1:0] a, input [WB-1:0] b,\n"
         "  output signed [WO-1:0] y);\n"
         "  assign y = a <<< b;\n"
         "endmodule\n\n";
  if (kinds.count("cmpge"))
    v << "module tessera_cmpge #(parameter WA = 8, WT = 8, INVERT = 0) (\n"
         "  input signed [WA-1:0] a, input signed [WT-1:0] thr,\n"
         "  output y);\n"
         "  assign y = (a >= thr) ^ INVERT[0];\n"
         "endmodule\n\n";
  for (int n : mux_arities)
    v << "module tessera_mux" << n << " #(parameter WIDTH = 8, SELW = 1) (\n"
         "  input [SELW-1:0] sel, input [" << n << "*WIDTH-1:0] d,\n"
         "  output [WIDTH-1:0] y);\n"
         "  assign y = d[sel*WIDTH +: WIDTH];\n"
         "endmodule\n\n";
  for (size_t n : reducer_arities) {
    v << "module tessera_reducer" << n << " #(parameter WIDTH = 32) (\n"
         "  input clk, input rst,\n";
    for (size_t i = 0; i < n; ++i)
      v << "  input signed [WIDTH-1:0] d" << i << ",\n";
    v << "  output signed [WIDTH-1:0] y);\n";
    // balanced tree with one register level per stage
    std::vector<std::string> cur;
    for (size_t i = 0; i < n; ++i) cur.push_back("d" + std::to_string(i));
    int stage = 0;
    while (cur.size() > 1) {
      std::vector<std::string> next;
      for (size_t i = 0; i + 1 < cur.size(); i += 2) {
        std::string w = "s" + std::to_string(stage) + "_" + std::to_string(i / 2);
        v << "  reg signed [WIDTH-1:0] " << w << ";\n";
        v << "  always @(posedge clk) begin\n"
          << "    if (rst) " << w << " <= {WIDTH{1'b0}};\n"
          << "    else " << w << " <= " << cur[i] << " + " << cur[i + 1] << ";\n"
          << "  end\n";
        next.push_back(w);
      }
      if (cur.size() % 2) {
        std::string w = "s" + std::to_string(stage) + "_p";
        v << "  reg signed [WIDTH-1:0] " << w << ";\n";
        v << "  always @(posedge clk) begin\n"
          << "    if (rst) " << w << " <= {WIDTH{1'b0}};\n"
          << "    else " << w << " <= " << cur.back() << ";\n"
          << "  end\n";
        next.push_back(w);
      }
      cur = next;
      ++stage;
    }
    v << "  assign y = " << cur[0] << ";\n";
    v << "endmodule\n\n";
  }
  if (kinds.count("membank"))
    v << "module tessera_membank #(parameter WIDTH = 8, DEPTH = 16, AW = 4) (\n"
         "  input clk, input rst,\n"
         "  input [AW-1:0] raddr, output reg [WIDTH-1:0] rdata,\n"
         "  input we, input [AW-1:0] waddr, input [WIDTH-1:0] wdata,\n"
         "  input ext_sel, input ext_we, input [AW-1:0] ext_addr,\n"
         "  input [WIDTH-1:0] ext_wdata, output [WIDTH-1:0] ext_rdata);\n"
         "  reg [WIDTH-1:0] mem [0:DEPTH-1];\n"
         "  wire [AW-1:0] a_w = ext_sel ? ext_addr : waddr;\n"
         "  wire w_en = ext_sel ? ext_we : we;\n"
         "  wire [WIDTH-1:0] d_w = ext_sel ? ext_wdata : wdata;\n"
         "  always @(posedge clk) begin\n"
         "    if (w_en) mem[a_w] <= d_w;\n"
         "    if (rst) rdata <= {WIDTH{1'b0}};\n"
         "    else rdata <= mem[raddr];\n"
         "  end\n"
         "  assign ext_rdata = mem[ext_addr];\n"
         "endmodule\n\n";
  if (any_counter) {
    // find the counter (single control unit)
    const DagNode* cn = nullptr;
    for (const auto& nd : dag.nodes)
      if (!nd.dead && nd.kind == Prim::Counter) cn = &nd;
    int nt = cn->counter_dims;
    int cw = kAddrCfgWidth;
    v << "module tessera_counter (\n  input clk, input rst, input en,\n";
    for (int j = 0; j < nt; ++j)
      v << "  input [" << cw - 1 << ":0] radix" << j << ",\n";
    for (int j = 0; j < nt; ++j)
      v << "  output reg [" << out_w(*cn, j) - 1 << ":0] t" << j << ",\n";
    v << "  output running,\n";
    v << "  output reg [" << out_w(*cn, nt + 1) - 1 << ":0] scalar);\n";
    v << "  reg done;\n";
    v << "  assign running = en & ~done;\n";
    v << "  always @(posedge clk) begin\n";
    v << "    if (rst) begin\n      done <= 1'b0;\n      scalar <= 0;\n";
    for (int j = 0; j < nt; ++j) v << "      t" << j << " <= 0;\n";
    v << "    end else if (en & ~done) begin\n";
    v << "      scalar <= scalar + 1;\n";
    // ripple increment from the innermost dimension
    std::string guard;
    for (int j = nt - 1; j >= 0; --j) {
      std::string wrap = "(t" + std::to_string(j) + " + 1 >= radix" +
                         std::to_string(j) + ")";
      std::string cond = guard.empty() ? wrap : guard + " & " + wrap;
      v << "      if (" << (guard.empty() ? std::string("1'b1")
                                          : guard) << ") begin\n";
      v << "        if (" << wrap << ") t" << j << " <= 0;\n";
      v << "        else t" << j << " <= t" << j << " + 1;\n";
      v << "      end\n";
      guard = cond;
    }
    v << "      if (" << guard << ") begin\n        done <= 1'b1;\n";
    for (int j = 0; j < nt; ++j)
      v << "        t" << j << " <= radix" << j << " - 1;\n";
    v << "      end\n";
    v << "    end\n  end\nendmodule\n\n";
  }
  if (any_addrgen) {
    // one module per (n_d, n_t, bank/word) signature
    std::set<std::tuple<int, int, bool>> sigs;
    for (const auto& nd : dag.nodes)
      if (!nd.dead && nd.kind == Prim::AddressGen)
        sigs.insert({nd.addr[0].map.n_out(), nd.counter_dims, nd.addr[0].bank_out});
    for (auto [n_d, nt, bank] : sigs) {
      int cw = kAddrCfgWidth;
      v << "module tessera_addrgen_d" << n_d << "_t" << nt << (bank ? "_bank" : "_word")
        << " #(parameter WO = 16, TW = 8) (\n  input clk, input rst,\n";
      v << "  input [" << nt << "*TW-1:0] t,\n";
      v << "  input [" << (n_d * (nt + 6) + 1) * cw - 1 << ":0] cfg,\n";
      v << "  output reg [WO-1:0] y);\n";
      int off = 0;
      auto slice = [&](const std::string& nm) {
        std::string s = "  wire signed [" + dec(cw - 1) + ":0] " + nm + " = cfg[" +
                        dec(off + cw - 1) + ":" + dec(off) + "];\n";
        off += cw;
        return s;
      };
      for (int r = 0; r < n_d; ++r) {
        for (int c = 0; c < nt; ++c) v << slice("a" + dec(r) + "_" + dec(c));
        v << slice("b" + dec(r)) << slice("g" + dec(r)) << slice("vv" + dec(r))
          << slice("sl" + dec(r)) << slice("sv" + dec(r)) << slice("sg" + dec(r));
      }
      v << slice("gt");
      for (int c = 0; c < nt; ++c)
        v << "  wire signed [" << cw - 1 << ":0] tx" << c << " = {{" << cw
          << "-TW{1'b0}}, t[" << c << "*TW +: TW]};\n";
      for (int r = 0; r < n_d; ++r) {
        v << "  wire signed [" << cw - 1 << ":0] d" << r << " = b" << r;
        for (int c = 0; c < nt; ++c) v << " + a" << r << "_" << c << "*tx" << c;
        v << ";\n";
        v << "  wire signed [" << cw - 1 << ":0] q" << r << " = d" << r << " / g"
          << r << ";\n";
      }
      v << "  wire signed [" << cw - 1 << ":0] acc = ";
      std::string expr;
      for (int r = 0; r < n_d; ++r) {
        if (bank)
          expr += (r ? " + " : "") + std::string("(q") + dec(r) + " % vv" + dec(r) +
                  ")*sv" + dec(r);
        else
          expr += (r ? " + " : "") + std::string("(q") + dec(r) + " / vv" + dec(r) +
                  ")*sl" + dec(r);
      }
      if (!bank) {
        expr = "(" + expr + ")*gt";
        for (int r = 0; r < n_d; ++r)
          expr += " + (d" + dec(r) + " % g" + dec(r) + ")*sg" + dec(r);
      }
      v << expr << ";\n";
      v << "  always @(posedge clk) begin\n"
           "    if (rst) y <= {WO{1'b0}};\n"
           "    else y <= acc[WO-1:0];\n"
           "  end\nendmodule\n\n";
    }
  }
  if (any_matmul) {
    std::set<int> arities;
    for (const auto& nd : dag.nodes)
      if (!nd.dead && nd.kind == Prim::ConstMatMul) arities.insert(int(nd.inputs.size()));
    for (int n : arities) {
      int cw = kAddrCfgWidth;
      v << "module tessera_matmul" << n << " #(parameter WO = 16, TW = 8) (\n"
           "  input clk, input rst,\n  input [" << n << "*TW-1:0] x,\n"
        << "  input [" << (n + 1) * cw - 1 << ":0] cfg,\n"
           "  output reg [WO-1:0] y);\n";
      v << "  wire signed [" << cw - 1 << ":0] acc = $signed(cfg[" << (n + 1) * cw - 1
        << ":" << n * cw << "])";
      for (int c = 0; c < n; ++c)
        v << " + $signed(cfg[" << (c + 1) * cw - 1 << ":" << c * cw
          << "]) * $signed({{" << cw << "-TW{1'b0}}, x[" << c << "*TW +: TW]})";
      v << ";\n";
      v << "  always @(posedge clk) begin\n    if (rst) y <= {WO{1'b0}};\n"
           "    else y <= acc[WO-1:0];\n  end\nendmodule\n\n";
    }
  }

  // ---- top module ------------------------------------------------------------
  struct Bank {
    std::string tensor;
    int bank;
    const DagNode* rd = nullptr;
    const DagNode* wr = nullptr;
  };
  std::map<std::pair<std::string, int>, Bank> banks;
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    if (nd.kind == Prim::MemRead || nd.kind == Prim::MemWrite) {
      Bank& b = banks[{nd.tensor, nd.bank}];
      b.tensor = nd.tensor;
      b.bank = nd.bank;
      if (nd.kind == Prim::MemRead) b.rd = &nd;
      else b.wr = &nd;
    }
  }

  v << "module tessera_top (\n  input clk,\n  input rst,\n  input run,\n";
  v << "  input [" << cfg_bits - 1 << ":0] cfg,\n";
  v << "  output running,\n";
  v << "  input ext_sel,\n";
  bool first_port = false;
  (void)first_port;
  for (const auto& [key, b] : banks) {
    std::string p = b.tensor + "_b" + dec(b.bank);
    int wdt = b.rd ? out_w(*b.rd) : std::max(dag.node(b.wr->inputs[1].node).width, 1);
    int aw = std::max(
        b.rd ? std::max(dag.node(b.rd->inputs[0].node).width, 1)
             : std::max(dag.node(b.wr->inputs[0].node).width, 1),
        1);
    v << "  input " << p << "_ext_we,\n";
    v << "  input [" << aw - 1 << ":0] " << p << "_ext_addr,\n";
    v << "  input [" << wdt - 1 << ":0] " << p << "_ext_wdata,\n";
    v << "  output [" << wdt - 1 << ":0] " << p << "_ext_rdata,\n";
  }
  v << "  output top_done_placeholder);\n";
  v << "  assign top_done_placeholder = 1'b0;\n\n";

  // wires
  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    if (nd.kind == Prim::MemWrite) continue;
    if (nd.kind == Prim::Counter) {
      for (int p = 0; p < nd.out_pins(); ++p)
        v << "  wire [" << out_w(nd, p) - 1 << ":0] " << wname(nd, p) << ";\n";
      continue;
    }
    if (nd.kind == Prim::OutPort || nd.kind == Prim::InPort) continue;
    v << "  wire [" << out_w(nd) - 1 << ":0] " << wname(nd) << ";\n";
  }
  v << "\n";

  auto ext_expr = [&](PinRef in, int want, bool want_signed) -> std::string {
    const DagNode& src = dag.node(in.node);
    int have = out_w(src, in.pin);
    bool s = out_signed(src, in.pin);
    std::string e = wname(src, in.pin);
    if (have == want) return e;
    if (have > want) return e + "[" + dec(want - 1) + ":0]";
    (void)want_signed;
    if (s)
      return "{{" + dec(want - have) + "{" + e + "[" + dec(have - 1) + "]}}, " + e +
             "}";
    return "{{" + dec(want - have) + "{1'b0}}, " + e + "}";
  };

  for (const auto& nd : dag.nodes) {
    if (nd.dead) continue;
    switch (nd.kind) {
      case Prim::InPort: break;
      case Prim::OutPort:
        if (nd.tensor == "running")
          v << "  assign running = " << wname(dag.node(nd.inputs[0].node),
                                              nd.inputs[0].pin) << ";\n";
        break;
      case Prim::ConfigReg:
        v << "  assign " << wname(nd) << " = " << cfg_slice(nd, nd.name) << "["
          << out_w(nd) - 1 << ":0];\n";
        break;
      case Prim::ClockGate:
        v << "  assign " << wname(nd) << " = "
          << wname(dag.node(nd.inputs[0].node), nd.inputs[0].pin) << ";\n";
        break;
      case Prim::Counter: {
        v << "  tessera_counter u_" << nd.name << " (.clk(clk), .rst(rst), .en(run)";
        for (int j = 0; j < nd.counter_dims; ++j)
          v << ", .radix" << j << "(" << cfg_slice(nd, nd.name + ".radix" + dec(j))
            << ")";
        for (int j = 0; j < nd.counter_dims; ++j)
          v << ", .t" << j << "(" << wname(nd, j) << ")";
        v << ", .running(" << wname(nd, nd.counter_dims) << ")";
        v << ", .scalar(" << wname(nd, nd.counter_dims + 1) << "));\n";
        break;
      }
      case Prim::Delay: {
        if (nd.depth == 0) {
          v << "  assign " << wname(nd) << " = "
            << ext_expr(nd.inputs[0], out_w(nd), out_signed(nd)) << ";\n";
          break;
        }
        std::string en = nd.gated ? wname(dag.node(nd.inputs.back().node),
                                          nd.inputs.back().pin)
                                  : std::string("1'b1");
        v << "  tessera_delay #(.WIDTH(" << out_w(nd) << "), .DEPTH(" << nd.depth
          << ")) u_" << nd.name << " (.clk(clk), .rst(rst), .en(" << en << "), .d("
          << ext_expr(nd.inputs[0], out_w(nd), out_signed(nd)) << "), .q("
          << wname(nd) << "));\n";
        break;
      }
      case Prim::Fifo: {
        const ConfigField* f = field_of.at({nd.id, nd.name + ".tap"});
        std::string en = nd.gated ? wname(dag.node(nd.inputs.back().node),
                                          nd.inputs.back().pin)
                                  : std::string("1'b1");
        v << "  tessera_fifo #(.WIDTH(" << out_w(nd) << "), .DEPTH(" << nd.depth
          << "), .TAPW(" << f->width << ")) u_" << nd.name
          << " (.clk(clk), .rst(rst), .en(" << en << "), .d("
          << ext_expr(nd.inputs[0], out_w(nd), out_signed(nd)) << "), .tap("
          << cfg_slice(nd, nd.name + ".tap") << "), .q(" << wname(nd) << "));\n";
        break;
      }
      case Prim::Add:
      case Prim::Mul:
      case Prim::ShiftLeft: {
        const char* m = nd.kind == Prim::Add ? "tessera_add"
                        : nd.kind == Prim::Mul ? "tessera_mul"
                                               : "tessera_shl";
        const DagNode& a = dag.node(nd.inputs[0].node);
        const DagNode& b = dag.node(nd.inputs[1].node);
        v << "  " << m << " #(.WA(" << out_w(a, nd.inputs[0].pin) << "), .WB("
          << out_w(b, nd.inputs[1].pin) << "), .WO(" << out_w(nd) << ")) u_"
          << nd.name << " (";
        if (nd.kind == Prim::Mul) v << ".clk(clk), .rst(rst), ";
        v << ".a(" << wname(a, nd.inputs[0].pin) << "), .b("
          << wname(b, nd.inputs[1].pin) << "), .y(" << wname(nd) << "));\n";
        break;
      }
      case Prim::CompareGE: {
        const ConfigField* f = field_of.at({nd.id, nd.name + ".thr"});
        const DagNode& a = dag.node(nd.inputs[0].node);
        v << "  tessera_cmpge #(.WA(" << out_w(a, nd.inputs[0].pin) + 1
          << "), .WT(" << f->width + 1 << "), .INVERT(" << (nd.invert ? 1 : 0)
          << ")) u_" << nd.name << " (.a({1'b0, " << wname(a, nd.inputs[0].pin)
          << "}), .thr({1'b0, " << cfg_slice(nd, nd.name + ".thr") << "}), .y("
          << wname(nd) << "));\n";
        break;
      }
      case Prim::Mux: {
        int n = int(nd.inputs.size()) - 1;
        const DagNode& sel = dag.node(nd.inputs[0].node);
        v << "  tessera_mux" << n << " #(.WIDTH(" << out_w(nd) << "), .SELW("
          << out_w(sel, nd.inputs[0].pin) << ")) u_" << nd.name << " (.sel("
          << wname(sel, nd.inputs[0].pin) << "), .d({";
        for (int i = n; i >= 1; --i) {
          v << ext_expr(nd.inputs[size_t(i)], out_w(nd), out_signed(nd));
          if (i > 1) v << ", ";
        }
        v << "}), .y(" << wname(nd) << "));\n";
        break;
      }
      case Prim::Reducer: {
        v << "  tessera_reducer" << nd.inputs.size() << " #(.WIDTH(" << out_w(nd)
          << ")) u_" << nd.name << " (.clk(clk), .rst(rst)";
        for (size_t i = 0; i < nd.inputs.size(); ++i)
          v << ", .d" << i << "(" << ext_expr(nd.inputs[i], out_w(nd), true) << ")";
        v << ", .y(" << wname(nd) << "));\n";
        break;
      }
      case Prim::AddressGen: {
        int n_d = nd.addr[0].map.n_out();
        int nt = nd.counter_dims;
        int tw = 0;
        for (int c = 0; c < nt; ++c)
          tw = std::max(tw, out_w(dag.node(nd.inputs[size_t(c)].node),
                                  nd.inputs[size_t(c)].pin));
        const ConfigField* f0 = field_of.at({nd.id, nd.name + ".a0_0"});
        const ConfigField* fl = field_of.at({nd.id, nd.name + ".gt"});
        v << "  tessera_addrgen_d" << n_d << "_t" << nt
          << (nd.addr[0].bank_out ? "_bank" : "_word") << " #(.WO(" << out_w(nd)
          << "), .TW(" << tw << ")) u_" << nd.name
          << " (.clk(clk), .rst(rst), .t({";
        for (int c = nt - 1; c >= 0; --c) {
          v << ext_expr(nd.inputs[size_t(c)], tw, false);
          if (c > 0) v << ", ";
        }
        v << "}), .cfg(cfg[" << fl->offset + fl->width - 1 << ":" << f0->offset
          << "]), .y(" << wname(nd) << "));\n";
        break;
      }
      case Prim::ConstMatMul: {
        int n = int(nd.inputs.size());
        int tw = 0;
        for (int c = 0; c < n; ++c)
          tw = std::max(tw, out_w(dag.node(nd.inputs[size_t(c)].node),
                                  nd.inputs[size_t(c)].pin));
        const ConfigField* f0 = field_of.at({nd.id, nd.name + ".a0"});
        const ConfigField* fl = field_of.at({nd.id, nd.name + ".b"});
        v << "  tessera_matmul" << n << " #(.WO(" << out_w(nd) << "), .TW(" << tw
          << ")) u_" << nd.name << " (.clk(clk), .rst(rst), .x({";
        for (int c = n - 1; c >= 0; --c) {
          v << ext_expr(nd.inputs[size_t(c)], tw, false);
          if (c > 0) v << ", ";
        }
        v << "}), .cfg(cfg[" << fl->offset + fl->width - 1 << ":" << f0->offset
          << "]), .y(" << wname(nd) << "));\n";
        break;
      }
      case Prim::MemRead:
      case Prim::MemWrite: break;  // emitted with the bank below
    }
  }

  v << "\n";
  for (const auto& [key, b] : banks) {
    std::string p = b.tensor + "_b" + dec(b.bank);
    int wdt = b.rd ? out_w(*b.rd) : std::max(dag.node(b.wr->inputs[1].node).width, 1);
    int aw = std::max(
        b.rd ? std::max(dag.node(b.rd->inputs[0].node).width, 1)
             : std::max(dag.node(b.wr->inputs[0].node).width, 1),
        1);
    i64 depth = i64(1) << aw;
    v << "  tessera_membank #(.WIDTH(" << wdt << "), .DEPTH(" << depth << "), .AW("
      << aw << ")) u_mem_" << p << " (.clk(clk), .rst(rst)";
    if (b.rd)
      v << ", .raddr(" << ext_expr(b.rd->inputs[0], aw, false) << "), .rdata("
        << wname(*b.rd) << ")";
    else
      v << ", .raddr({" << aw << "{1'b0}}), .rdata()";
    if (b.wr)
      v << ", .we(" << wname(dag.node(b.wr->inputs[2].node), b.wr->inputs[2].pin)
        << "), .waddr(" << ext_expr(b.wr->inputs[0], aw, false) << "), .wdata("
        << ext_expr(b.wr->inputs[1], wdt, true) << ")";
    else
      v << ", .we(1'b0), .waddr({" << aw << "{1'b0}}), .wdata({" << wdt
        << "{1'b0}})";
    v << ",\n    .ext_sel(ext_sel), .ext_we(" << p << "_ext_we), .ext_addr(" << p
      << "_ext_addr), .ext_wdata(" << p << "_ext_wdata), .ext_rdata(" << p
      << "_ext_rdata));\n";
  }
  v << "endmodule\n";
  return v.str();
}

}  // namespace tessera
