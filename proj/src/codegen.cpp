#include "tessera/codegen.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "tessera/passes.hpp"

namespace tessera {

namespace {

std::string fu_tag(const Vec& s) {
  std::string out = "r" + std::to_string(s.empty() ? 0 : s[0]);
  if (s.size() > 1) out += "_c" + std::to_string(s[1]);
  for (size_t i = 2; i < s.size(); ++i) out += "_x" + std::to_string(s[i]);
  return out;
}

struct Builder {
  const Adg& adg;
  Dag dag;
  int n_df;
  int n_t;  // padded temporal rank, shared by all dataflows
  Vec radix_max;

  int run_port = -1;
  int counter = -1;
  std::map<std::string, int> ordinals;
  std::map<i64, int> const_regs;
  std::map<Vec, int> cfg_regs;
  // distributed signals: (control pin, FU) -> local pin
  std::map<std::pair<std::pair<int, int>, Vec>, PinRef> dist_cache;
  bool chain_mode = true;
  Vec chain_origin;  // per spatial dim

  explicit Builder(const Adg& a) : adg(a) {
    n_df = int(adg.spec.dataflows.size());
    n_t = 0;
    for (const auto& df : adg.spec.dataflows) n_t = std::max(n_t, df.n_t());
    radix_max.assign(n_t, 1);
    for (const auto& df : adg.spec.dataflows)
      for (int j = 0; j < df.n_t(); ++j)
        radix_max[j] = std::max(radix_max[j], df.for_sizes[j]);
    dag.n_dataflows = n_df;
  }

  // padded (outermost-aligned) temporal vectors per dataflow
  Vec padded_sizes(int k) const {
    Vec r = adg.spec.dataflows[k].for_sizes;
    r.resize(n_t, 1);
    return r;
  }
  Vec padded_dt(int k, const Vec& dt) const {
    Vec r = dt;
    r.resize(n_t, 0);
    return r;
  }
  Window padded_window(int k, const Window& w) const {
    Window r = w;
    r.lo.resize(n_t, 0);
    r.hi.resize(n_t, 0);
    for (int j = int(adg.spec.dataflows[k].for_sizes.size()); j < n_t; ++j) {
      r.lo[j] = 0;
      r.hi[j] = 0;
    }
    return r;
  }

  int fresh(Prim kind, const std::string& scope, std::vector<PinRef> inputs,
            DagNode tmpl = {}) {
    DagNode n = std::move(tmpl);
    n.kind = kind;
    std::string base = scope + "__" + prim_name(kind);
    int ord = ordinals[base]++;
    n.name = base + "_" + std::to_string(ord);
    n.inputs = std::move(inputs);
    return dag.add(std::move(n));
  }

  int const_reg(i64 v) {
    auto it = const_regs.find(v);
    if (it != const_regs.end()) return it->second;
    DagNode t;
    t.df_value.assign(n_df, v);
    int id = fresh(Prim::ConfigReg, "ctl", {}, std::move(t));
    const_regs[v] = id;
    return id;
  }

  int cfg_reg(const Vec& per_df, const std::string& scope) {
    Vec key = per_df;
    auto it = cfg_regs.find(key);
    if (it != cfg_regs.end()) return it->second;
    DagNode t;
    t.df_value = per_df;
    int id = fresh(Prim::ConfigReg, scope, {}, std::move(t));
    cfg_regs[key] = id;
    return id;
  }

  // 1-bit logic built from muxes (select, in0, in1)
  PinRef mux2(PinRef sel, PinRef a0, PinRef a1, const std::string& scope) {
    return {fresh(Prim::Mux, scope, {sel, a0, a1}), 0};
  }
  PinRef gate_and(PinRef a, PinRef b, const std::string& scope) {
    return mux2(a, {const_reg(0), 0}, b, scope);
  }
  PinRef gate_or(PinRef a, PinRef b, const std::string& scope) {
    return mux2(a, b, {const_reg(1), 0}, scope);
  }
  PinRef gate_not(PinRef a, const std::string& scope) {
    return mux2(a, {const_reg(1), 0}, {const_reg(0), 0}, scope);
  }

  PinRef cmp_ge(PinRef x, const Vec& thresholds, bool invert,
                const std::string& scope) {
    DagNode t;
    t.df_value = thresholds;
    t.invert = invert;
    return {fresh(Prim::CompareGE, scope, {x}, std::move(t)), 0};
  }

  /// Delay line with per-dataflow tap; returns input unchanged when the
  /// physical depth is zero. A combinational bypass mux handles dataflows
  /// whose tap is zero while others register.
  PinRef tapped_fifo(PinRef in, Vec taps, const std::string& scope,
                     const std::string& tensor = "", i64 accum_bound = 0) {
    i64 physical = *std::max_element(taps.begin(), taps.end());
    if (physical == 0) return in;
    bool any_zero = std::any_of(taps.begin(), taps.end(), [](i64 t) { return t == 0; });
    DagNode t;
    t.depth = physical;
    t.tensor = tensor;
    t.accum_bound = accum_bound;
    Vec clamped = taps;
    if (any_zero)
      for (auto& x : clamped) x = std::max<i64>(x, 1);
    t.df_value = clamped;
    PinRef fifo = {fresh(Prim::Fifo, scope, {in}, std::move(t)), 0};
    if (!any_zero) return fifo;
    Vec bypass(n_df);
    for (int k = 0; k < n_df; ++k) bypass[k] = taps[k] == 0 ? 1 : 0;
    PinRef sel = {cfg_reg(bypass, scope), 0};
    return mux2(sel, fifo, in, scope);
  }

  // ---- control unit ---------------------------------------------------------

  void build_control() {
    run_port = fresh(Prim::InPort, "ctl", {});
    dag.node(run_port).tensor = "run";
    DagNode c;
    c.counter_dims = n_t;
    c.df_radix.resize(n_df);
    for (int k = 0; k < n_df; ++k) c.df_radix[k] = padded_sizes(k);
    counter = fresh(Prim::Counter, "ctl", {{run_port, 0}}, std::move(c));
    int out = fresh(Prim::OutPort, "ctl", {{counter, n_t}});
    dag.node(out).tensor = "running";

    // distribution topology
    chain_mode = true;
    int n_s = int(adg.fu_grid.size());
    chain_origin.assign(n_s, 0);
    for (int d = 0; d < n_s; ++d) {
      bool pos = false, neg = false;
      for (const auto& df : adg.spec.dataflows) {
        if (df.control[d] > 0) pos = true;
        if (df.control[d] < 0) neg = true;
      }
      if (pos && neg) chain_mode = false;
      chain_origin[d] = neg && !pos ? adg.fu_grid[d] - 1 : 0;
    }
  }

  PinRef t_pin(int j) { return {counter, j}; }
  PinRef running_pin() { return {counter, n_t}; }

  i64 bias_shift(int k) const {  // min bias over the dataflow's grid
    const auto& df = adg.spec.dataflows[k];
    i64 m = 0;
    for (size_t d = 0; d < df.control.size(); ++d)
      if (df.control[d] < 0) m += df.control[d] * (adg.fu_grid[d] - 1);
    return m;
  }

  Vec hop_taps(int dim) const {
    Vec taps(n_df);
    for (int k = 0; k < n_df; ++k)
      taps[k] = std::abs(adg.spec.dataflows[k].control[dim]);
    return taps;
  }

  /// Local copy of a control-unit signal at an FU, reusing the per-dimension
  /// store-and-forward chains (|c_k| per hop; wires when zero).
  PinRef at_fu(PinRef sig, const Vec& s) {
    auto key = std::make_pair(std::make_pair(sig.node, sig.pin), s);
    auto it = dist_cache.find(key);
    if (it != dist_cache.end()) return it->second;
    PinRef local;
    if (!chain_mode) {
      Vec taps(n_df);
      for (int k = 0; k < n_df; ++k) {
        const auto& df = adg.spec.dataflows[k];
        taps[k] = timestamp_bias(s, df.control) - bias_shift(k);
      }
      local = tapped_fifo(sig, taps, "fu_" + fu_tag(s));
      if (local.node != sig.node && dag.node(local.node).kind == Prim::Fifo)
        dag.node(local.node).tag = DelayTag::Control;
    } else if (s == chain_origin) {
      local = sig;
    } else {
      int dim = -1;
      for (int d = int(s.size()) - 1; d >= 0; --d)
        if (s[d] != chain_origin[d]) {
          dim = d;
          break;
        }
      Vec parent = s;
      parent[dim] += chain_origin[dim] > s[dim] ? 1 : -1;
      PinRef up = at_fu(sig, parent);
      local = tapped_fifo(up, hop_taps(dim), "fu_" + fu_tag(s));
      if (local.node != up.node && dag.node(local.node).kind == Prim::Fifo)
        dag.node(local.node).tag = DelayTag::Control;
    }
    dist_cache[key] = local;
    return local;
  }

  // ---- window signals -------------------------------------------------------

  /// AND of in-window comparisons for one window slot; missing dataflows get
  /// an always-false configuration on dim 0.
  PinRef window_slot(const std::vector<const Window*>& per_df,
                     const std::string& scope) {
    PinRef acc = {const_reg(1), 0};
    bool first = true;
    for (int j = 0; j < n_t; ++j) {
      Vec lo(n_df, 0), hi_excl(n_df, 0);
      bool lo_needed = false, hi_needed = false;
      for (int k = 0; k < n_df; ++k) {
        Vec sizes = padded_sizes(k);
        if (!per_df[k]) {  // force false on dim 0
          lo[k] = j == 0 ? radix_max[0] + 1 : 0;
          hi_excl[k] = sizes[j];
          lo_needed |= j == 0;
          continue;
        }
        Window w = padded_window(k, *per_df[k]);
        lo[k] = w.lo[j];
        hi_excl[k] = w.hi[j] + 1;
        lo_needed |= w.lo[j] > 0;
        hi_needed |= w.hi[j] + 1 < sizes[j];
      }
      if (lo_needed) {
        PinRef c = cmp_ge(t_pin(j), lo, false, scope);
        acc = first ? c : gate_and(acc, c, scope);
        first = false;
      }
      if (hi_needed) {
        PinRef c = cmp_ge(t_pin(j), hi_excl, true, scope);  // t_j < hi+1
        acc = first ? c : gate_and(acc, c, scope);
        first = false;
      }
    }
    return acc;
  }

  /// OR over window slots; per dataflow the slot list comes from one reuse
  /// relation (primary delta_t plus same-depth alternates).
  PinRef window_signal(const std::vector<std::vector<Window>>& windows_per_df,
                       const std::string& scope, bool empty_is_false = false) {
    size_t n_slots = 0;
    for (const auto& ws : windows_per_df) n_slots = std::max(n_slots, ws.size());
    if (n_slots == 0) return {const_reg(empty_is_false ? 0 : 1), 0};
    PinRef acc{-1, 0};
    for (size_t slot = 0; slot < n_slots; ++slot) {
      std::vector<const Window*> per_df(n_df, nullptr);
      for (int k = 0; k < n_df; ++k)
        if (slot < windows_per_df[k].size()) per_df[k] = &windows_per_df[k][slot];
      PinRef bit = window_slot(per_df, scope);
      acc = acc.node < 0 ? bit : gate_or(acc, bit, scope);
    }
    return acc;
  }

  // ---- memory ---------------------------------------------------------------

  struct TensorMem {
    std::vector<int> read_banks;   // MemRead per bank (inputs)
    std::vector<int> write_banks;  // MemWrite per bank (outputs), patched later
    // write-side accumulation of (sel, addr, data, en) per bank
    struct WPort {
      PinRef sel, addr, data, en;
    };
    std::map<int, std::vector<WPort>> writers;
  };
  std::map<std::string, TensorMem> mems;

  void build_memories() {
    for (const auto& tb : adg.banking.tensors) {
      const TensorDecl& decl = adg.spec.workload.tensor(tb.tensor);
      TensorMem tm;
      if (decl.role == TensorRole::Input) {
        for (i64 b = 0; b < tb.physical_banks; ++b) {
          DagNode t;
          t.tensor = tb.tensor;
          t.bank = int(b);
          tm.read_banks.push_back(-1);  // filled once the addr mux exists
          (void)t;
        }
      }
      mems[tb.tensor] = tm;
    }
  }

  /// AddressGen pair (bank index + word address) for one data node.
  std::pair<PinRef, PinRef> addr_gen(const std::string& tensor, const Vec& s,
                                     const std::set<int>& active_dfs) {
    const TensorBanking& tb = adg.banking.of(tensor);
    const TensorDecl& decl = adg.spec.workload.tensor(tensor);
    std::string scope = "port_" + tensor + "_" + fu_tag(s);
    std::vector<PinRef> t_local;
    for (int j = 0; j < n_t; ++j) t_local.push_back(at_fu(t_pin(j), s));

    auto make = [&](bool bank_out) {
      DagNode t;
      t.counter_dims = n_t;
      t.tensor = tensor;
      t.fu = s;
      t.addr.resize(n_df);
      for (int k = 0; k < n_df; ++k) {
        auto& cfg = t.addr[k];
        cfg.active = active_dfs.count(k) > 0;
        cfg.bank_out = bank_out;
        cfg.g = tb.per_df[k].g;
        cfg.view = tb.per_df[k].view;
        cfg.extents = tb.extents;
        const DataflowSpec& df = adg.spec.dataflows[k];
        if (!cfg.active) {
          cfg.map = AffineMap(decl.access.n_out(), n_t);
          continue;
        }
        // fold the FU coordinate into the bias: d = A_t * t + (A_s * s + b)
        AffineMap at = decl.access.compose(df.map_t);
        AffineMap as = decl.access.compose(df.map_s);
        Vec sb = as.apply(s);
        AffineMap padded(at.n_out(), n_t);
        for (int r = 0; r < at.n_out(); ++r) {
          for (int c2 = 0; c2 < at.n_in(); ++c2) padded.at(r, c2) = at.at(r, c2);
          padded.bias(r) = sb[r];  // includes access bias via compose chain
        }
        cfg.map = padded;
      }
      return PinRef{fresh(Prim::AddressGen, scope, t_local, std::move(t)), 0};
    };
    return {make(true), make(false)};
  }

  // ---- per-FU datapath ------------------------------------------------------

  struct FuState {
    std::map<std::string, int> operand;   // tensor -> value node (inputs)
    int partial = -1;                     // output accumulation value
  };
  std::map<Vec, FuState> fus;
  struct Patch {
    int node;
    int pin;
    std::string tensor;
    Vec src_fu;
    bool output_side;
  };
  std::vector<Patch> patches;

  Vec df_mask(const std::set<int>& dfs) const {
    Vec m(n_df, 0);
    for (int k : dfs) m[k] = 1;
    return m;
  }

  std::set<int> fu_active_dfs(const Vec& s) const {
    std::set<int> out;
    for (int k = 0; k < n_df; ++k)
      if (fu_in_grid(s, adg.spec.dataflows[k].par_sizes)) out.insert(k);
    return out;
  }

  /// Priority source mux for one input tensor at one FU.
  int build_operand(const Vec& s, const TensorPlan& tp) {
    std::string scope = "fu_" + fu_tag(s);
    const std::string& tensor = tp.tensor;

    // memory source (when this FU is ever a data node for the tensor)
    PinRef base = {const_reg(0), 0};
    auto dn = tp.data_nodes.find(s);
    if (dn != tp.data_nodes.end()) {
      auto [bank_idx, addr] = addr_gen(tensor, s, dn->second);
      const TensorBanking& tb = adg.banking.of(tensor);
      TensorMem& tm = mems[tensor];
      // register this port as a reader on every bank (addr mux built later)
      Vec mask = df_mask(dn->second);
      PinRef mask_pin = {cfg_reg(mask, scope), 0};
      tm.writers[-1].push_back({mask_pin, addr, bank_idx, {}});  // reader stash
      if (tb.physical_banks == 1) {
        base = {ensure_read_bank(tensor, 0), 0};
      } else {
        std::vector<PinRef> pins{bank_idx};
        for (i64 b = 0; b < tb.physical_banks; ++b)
          pins.push_back({ensure_read_bank(tensor, int(b)), 0});
        base = {fresh(Prim::Mux, scope, pins), 0};
      }
    }

    // hold FIFO (patched feedback from the final operand value)
    PinRef hold_in = base;
    bool any_hold = false;
    Vec hold_taps(n_df, 0);
    std::vector<std::vector<Window>> hold_windows(n_df);
    Vec hold_mask(n_df, 0);
    for (int k = 0; k < n_df; ++k) {
      const HoldInfo& h = tp.hold[k];
      if (!h.present) continue;
      any_hold = true;
      hold_taps[k] = h.depth;
      hold_windows[k] = h.windows;
      hold_mask[k] = 1;
    }
    PinRef value = base;
    if (any_hold) {
      for (auto& t : hold_taps)
        if (t == 0) t = 1;  // holds are never wires; masked off when absent
      DagNode t;
      t.depth = *std::max_element(hold_taps.begin(), hold_taps.end());
      t.df_value = hold_taps;
      t.tensor = tensor;
      int fifo = fresh(Prim::Fifo, scope, {{-1, 0}}, std::move(t));
      patches.push_back({fifo, 0, tensor, s, false});
      PinRef hold_ok = window_signal(hold_windows, scope);
      hold_ok = gate_and({cfg_reg(hold_mask, scope), 0}, hold_ok, scope);
      value = mux2(distribute_bit(hold_ok, s), base, {fifo, 0}, scope);
    }

    // inbound edges, later dataflow-selected by validity + activation masks
    std::vector<const PlanEdge*> inbound;
    for (const auto& e : tp.edges)
      if (e.dst == s) inbound.push_back(&e);
    for (const PlanEdge* e : inbound) {
      Vec taps(n_df, 0);
      std::vector<std::vector<Window>> wins(n_df);
      Vec mask(n_df, 0);
      for (int k = 0; k < n_df; ++k) {
        if (!e->per_df[k].active) continue;
        mask[k] = 1;
        taps[k] = e->per_df[k].depth;
        wins[k] = e->per_df[k].windows;
      }
      PinRef edge_val = make_edge_fifo(*e, taps, false);
      PinRef ok = window_signal(wins, scope);
      ok = gate_and({cfg_reg(mask, scope), 0}, ok, scope);
      value = mux2(distribute_bit(ok, s), value, edge_val, scope);
    }
    return value.node >= 0 ? value.node : const_reg(0);
  }

  /// Window/validity bits are computed at the control unit and travel the
  /// distribution chains; constants stay in place.
  PinRef distribute_bit(PinRef bit, const Vec& s) {
    if (dag.node(bit.node).kind == Prim::ConfigReg) return bit;
    return at_fu(bit, s);
  }

  std::map<std::pair<std::string, std::pair<Vec, Vec>>, PinRef> edge_fifos;

  PinRef make_edge_fifo(const PlanEdge& e, const Vec& taps, bool output_side) {
    auto key = std::make_pair(e.tensor, std::make_pair(e.src, e.dst));
    auto it = edge_fifos.find(key);
    if (it != edge_fifos.end()) return it->second;
    std::string scope = "fu_" + fu_tag(e.dst);
    i64 physical = *std::max_element(taps.begin(), taps.end());
    PinRef out;
    if (physical == 0) {
      // pure wire; patched to the source value directly
      int alias = fresh(Prim::Delay, scope, {{-1, 0}});
      dag.node(alias).depth = 0;  // structural wire placeholder
      patches.push_back({alias, 0, e.tensor, e.src, output_side});
      out = {alias, 0};
    } else {
      bool any_zero = false;
      Vec clamped = taps;
      for (int k = 0; k < n_df; ++k)
        if (e.per_df[k].active && taps[k] == 0) any_zero = true;
      for (auto& t : clamped)
        if (t == 0) t = 1;
      DagNode t;
      t.depth = physical;
      t.df_value = clamped;
      t.tensor = e.tensor;
      int fifo = fresh(Prim::Fifo, scope, {{-1, 0}}, std::move(t));
      patches.push_back({fifo, 0, e.tensor, e.src, output_side});
      out = {fifo, 0};
      if (any_zero) {
        int alias = fresh(Prim::Delay, scope, {{-1, 0}});
        dag.node(alias).depth = 0;
        patches.push_back({alias, 0, e.tensor, e.src, output_side});
        Vec bypass(n_df, 0);
        for (int k = 0; k < n_df; ++k)
          if (e.per_df[k].active && taps[k] == 0) bypass[k] = 1;
        out = mux2({cfg_reg(bypass, scope), 0}, out, {alias, 0}, scope);
      }
    }
    edge_fifos[key] = out;
    return out;
  }

  int ensure_read_bank(const std::string& tensor, int bank) {
    TensorMem& tm = mems[tensor];
    if (tm.read_banks.empty())
      tm.read_banks.assign(size_t(adg.banking.of(tensor).physical_banks), -1);
    if (tm.read_banks[bank] >= 0) return tm.read_banks[bank];
    std::string scope = "mem_" + tensor + "_b" + std::to_string(bank);
    DagNode t;
    t.tensor = tensor;
    t.bank = bank;
    int rd = fresh(Prim::MemRead, scope, {{-1, 0}}, std::move(t));
    tm.read_banks[bank] = rd;
    return rd;
  }

  // write-side registration: (bank_idx, addr, data, en) per committing port
  struct PendingWrite {
    std::string tensor;
    Vec fu;
    PinRef bank_idx, addr, data, en;
    std::set<int> dfs;
  };
  std::vector<PendingWrite> pending_writes;

  void build_fu(const Vec& s) {
    const WorkloadSpec& w = adg.spec.workload;
    std::string scope = "fu_" + fu_tag(s);
    FuState& st = fus[s];

    for (const auto* td : w.input_tensors())
      st.operand[td->name] = build_operand(s, adg.tensor_plan(td->name));

    // arithmetic tree
    std::function<PinRef(const ComputeExpr::Node&)> lower =
        [&](const ComputeExpr::Node& n) -> PinRef {
      if (n.op == ComputeExpr::Op::Operand) return {st.operand.at(n.tensor), 0};
      PinRef a = lower(*n.lhs), b = lower(*n.rhs);
      Prim p = n.op == ComputeExpr::Op::Mul ? Prim::Mul : Prim::ShiftLeft;
      return {fresh(p, scope, {a, b}), 0};
    };
    PinRef product = lower(*w.compute.root);

    // output accumulation
    const TensorPlan& tp = adg.tensor_plan(w.output_tensor().name);
    PinRef acc = product;
    std::vector<const PlanEdge*> children;
    for (const auto& e : tp.edges)
      if (e.dst == s) children.push_back(&e);
    for (const PlanEdge* e : children) {
      Vec taps(n_df, 0);
      std::vector<std::vector<Window>> wins(n_df);
      Vec mask(n_df, 0);
      for (int k = 0; k < n_df; ++k) {
        if (!e->per_df[k].active) continue;
        mask[k] = 1;
        taps[k] = e->per_df[k].depth;
        wins[k] = e->per_df[k].windows;
      }
      PinRef val = make_edge_fifo(*e, taps, true);
      PinRef ok = window_signal(wins, scope);
      ok = gate_and({cfg_reg(mask, scope), 0}, ok, scope);
      PinRef gated = mux2(distribute_bit(ok, s), {const_reg(0), 0}, val, scope);
      acc = {fresh(Prim::Add, scope, {acc, gated}), 0};
    }

    // hold accumulator: active only where this FU commits (is a root)
    Vec root_mask(n_df, 0);
    for (int k = 0; k < n_df; ++k)
      for (const Vec& r : tp.roots_per_df[k])
        if (r == s) root_mask[k] = 1;
    bool any_root = std::any_of(root_mask.begin(), root_mask.end(),
                                [](i64 x) { return x != 0; });
    Vec hold_taps(n_df, 1);
    std::vector<std::vector<Window>> hold_windows(n_df);
    bool any_hold = false;
    for (int k = 0; k < n_df; ++k) {
      const HoldInfo& h = tp.hold[k];
      if (!h.present || !root_mask[k]) continue;
      any_hold = true;
      hold_taps[k] = std::max<i64>(h.depth, 1);
      hold_windows[k] = h.windows;
    }
    if (any_hold) {
      DagNode t;
      t.depth = *std::max_element(hold_taps.begin(), hold_taps.end());
      t.df_value = hold_taps;
      t.tensor = tp.tensor;
      t.accum_bound = accum_bound(tp.tensor);
      int fifo = fresh(Prim::Fifo, scope, {{-1, 0}}, std::move(t));
      patches.push_back({fifo, 0, tp.tensor, s, true});
      Vec hmask(n_df, 0);
      for (int k = 0; k < n_df; ++k)
        hmask[k] = tp.hold[k].present && root_mask[k] ? 1 : 0;
      PinRef ok = window_signal(hold_windows, scope);
      ok = gate_and({cfg_reg(hmask, scope), 0}, ok, scope);
      PinRef gated = mux2(distribute_bit(ok, s), {const_reg(0), 0}, {fifo, 0}, scope);
      acc = {fresh(Prim::Add, scope, {acc, gated}), 0};
    }
    st.partial = acc.node;

    // commit
    auto dn = tp.data_nodes.find(s);
    if (any_root && dn != tp.data_nodes.end()) {
      auto [bank_idx, addr] = addr_gen(tp.tensor, s, dn->second);
      // last access of the element: no future hold instance
      std::vector<std::vector<Window>> future(n_df);
      for (int k = 0; k < n_df; ++k) {
        const HoldInfo& h = tp.hold[k];
        if (!root_mask[k]) continue;
        if (!h.present) continue;  // single access: always last
        Vec sizes = padded_sizes(k);
        Vec neg = padded_dt(k, h.delta_t);
        for (auto& x : neg) x = -x;
        future[k].push_back(window_of(neg, sizes));
      }
      PinRef has_future = window_signal(future, scope, true);
      PinRef commit = gate_not(has_future, scope);
      commit = gate_and({cfg_reg(root_mask, scope), 0}, commit, scope);
      commit = gate_and(at_fu(running_pin(), s), distribute_bit(commit, s), scope);
      pending_writes.push_back(
          {tp.tensor, s, bank_idx, addr, acc, commit, dn->second});
    }
  }

  i64 accum_bound_cache = -1;
  i64 accum_bound(const std::string& tensor) {
    if (accum_bound_cache >= 0) return accum_bound_cache;
    const TensorDecl& decl = adg.spec.workload.tensor(tensor);
    i64 worst = 1;
    for (int k = 0; k < n_df; ++k) {
      const DataflowSpec& df = adg.spec.dataflows[k];
      AffineMap ts = decl.access.compose(df.map_ts());
      std::map<Vec, i64> counts;
      Vec shape = df.for_sizes;
      shape.insert(shape.end(), df.par_sizes.begin(), df.par_sizes.end());
      for_each_point(shape, [&](const Vec& p) { counts[ts.apply(p)] += 1; });
      for (const auto& [d, c] : counts) worst = std::max(worst, c);
    }
    accum_bound_cache = worst;
    return worst;
  }

  void finish_memories() {
    // read banks: priority address mux over reading ports
    struct Reader {
      std::string tensor;
      PinRef mask, addr, bank_idx;
    };
    std::map<std::string, std::vector<Reader>> readers;
    for (auto& [tensor, tm] : mems) {
      auto it = tm.writers.find(-1);
      if (it == tm.writers.end()) continue;
      for (const auto& wp : it->second)
        readers[tensor].push_back({tensor, wp.sel, wp.addr, wp.data});
      tm.writers.erase(it);
    }
    for (auto& [tensor, tm] : mems) {
      for (size_t b = 0; b < tm.read_banks.size(); ++b) {
        int rd = tm.read_banks[b];
        if (rd < 0) continue;
        std::string scope = "mem_" + tensor + "_b" + std::to_string(b);
        PinRef addr = {const_reg(0), 0};
        for (const auto& r : readers[tensor]) {
          PinRef here = bank_match(r.bank_idx, i64(b), scope);
          here = gate_and(r.mask, here, scope);
          addr = mux2(here, addr, r.addr, scope);
        }
        dag.node(rd).inputs[0] = addr;
      }
    }
    // write banks
    for (const auto& pw : pending_writes) {
      const TensorBanking& tb = adg.banking.of(pw.tensor);
      for (i64 b = 0; b < tb.physical_banks; ++b) {
        std::string scope = "mem_" + pw.tensor + "_b" + std::to_string(b);
        PinRef here = bank_match(pw.bank_idx, b, scope);
        here = gate_and(pw.en, here, scope);
        mems[pw.tensor].writers[int(b)].push_back({here, pw.addr, pw.data, here});
      }
    }
    for (auto& [tensor, tm] : mems) {
      for (auto& [bank, ports] : tm.writers) {
        if (bank < 0) continue;
        std::string scope = "mem_" + tensor + "_b" + std::to_string(bank);
        PinRef addr = {const_reg(0), 0};
        PinRef data = {const_reg(0), 0};
        PinRef en = {const_reg(0), 0};
        for (const auto& p : ports) {
          addr = mux2(p.sel, addr, p.addr, scope);
          data = mux2(p.sel, data, p.data, scope);
          en = gate_or(en, p.en, scope);
        }
        DagNode t;
        t.tensor = tensor;
        t.bank = bank;
        fresh(Prim::MemWrite, scope, {addr, data, en}, std::move(t));
      }
    }
  }

  PinRef bank_match(PinRef bank_idx, i64 b, const std::string& scope) {
    PinRef ge = cmp_ge(bank_idx, Vec(n_df, b), false, scope);
    PinRef lt = cmp_ge(bank_idx, Vec(n_df, b + 1), true, scope);
    return gate_and(ge, lt, scope);
  }

  void apply_patches() {
    for (const auto& p : patches) {
      auto it = fus.find(p.src_fu);
      TESSERA_CHECK(it != fus.end(), "patch: unknown FU");
      int src = p.output_side ? it->second.partial : it->second.operand.at(p.tensor);
      dag.node(p.node).inputs[size_t(p.pin)] = {src, 0};
    }
  }

  Dag build() {
    build_control();
    build_memories();
    std::vector<Vec> all_fus;
    for_each_point(adg.fu_grid, [&](const Vec& s) { all_fus.push_back(s); });
    for (const Vec& s : all_fus) build_fu(s);
    apply_patches();
    finish_memories();
    infer_bitwidth_inplace(dag, adg.spec);
    auto issues = check_wellformed(dag);
    if (!issues.empty())
      throw InternalError("codegen produced ill-formed graph: " + issues.front());
    return std::move(dag);
  }
};

}  // namespace

Dag codegen(const Adg& adg) {
  Builder b(adg);
  return b.build();
}

}  // namespace tessera
