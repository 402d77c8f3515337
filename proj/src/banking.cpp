#include "tessera/banking.hpp"

#include <algorithm>
#include <numeric>

namespace tessera {

const TensorBanking& BankingPlan::of(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.tensor == name) return t;
  throw InternalError("no banking for tensor " + name);
}

BankDims bank_analysis(const FusedDesignSpec& spec, const DataflowSpec& df,
                       const std::string& tensor, const std::vector<Vec>& data_nodes) {
  const TensorDecl& decl = spec.workload.tensor(tensor);
  int n_d = decl.access.n_out();
  AffineMap ts = decl.access.compose(df.map_ts());

  Vec t0(df.n_t(), 0);
  std::vector<Vec> at_zero;
  for (const Vec& s : data_nodes) {
    Vec p = t0;
    p.insert(p.end(), s.begin(), s.end());
    at_zero.push_back(ts.apply(p));
  }

  std::vector<std::set<i64>> deltas(n_d);
  for (size_t a = 0; a < at_zero.size(); ++a)
    for (size_t b = a + 1; b < at_zero.size(); ++b)
      for (int i = 0; i < n_d; ++i) {
        i64 d = std::abs(at_zero[a][i] - at_zero[b][i]);
        if (d != 0) deltas[i].insert(d);
      }

  BankDims out;
  out.B.resize(n_d);
  out.g.resize(n_d);
  for (int i = 0; i < n_d; ++i) {
    if (deltas[i].empty()) {
      out.g[i] = 1;
      out.B[i] = 1;
      continue;
    }
    i64 g = 0, mx = 0;
    for (i64 d : deltas[i]) {
      g = std::gcd(g, d);
      mx = std::max(mx, d);
    }
    out.g[i] = g;
    out.B[i] = mx / g + 1;
  }
  return out;
}

TensorBanking fuse_banking(const FusedDesignSpec& spec, const std::string& tensor,
                           std::vector<BankDims> per_df) {
  TensorBanking out;
  out.tensor = tensor;
  out.extents = spec.tensor_extents(spec.workload.tensor(tensor));

  i64 phys = 1;
  for (const auto& d : per_df) phys = std::max(phys, vec_product(d.B));

  // Round phys up until every dataflow's view can tile it by padding its
  // largest dimension.
  auto pad_dim = [](const Vec& B) {
    size_t j = 0;
    for (size_t i = 1; i < B.size(); ++i)
      if (B[i] > B[j]) j = i;
    return j;
  };
  while (true) {
    bool ok = true;
    for (const auto& d : per_df) {
      i64 others = vec_product(d.B) / d.B[pad_dim(d.B)];
      if (phys % others != 0 || phys / others < d.B[pad_dim(d.B)]) ok = false;
    }
    if (ok) break;
    ++phys;
  }
  out.physical_banks = phys;
  for (auto& d : per_df) {
    d.view = d.B;
    size_t j = pad_dim(d.B);
    d.view[j] = phys / (vec_product(d.B) / d.B[j]);
  }

  for (const auto& d : per_df) {
    i64 cap = 1;
    for (size_t i = 0; i < out.extents.size(); ++i) {
      i64 span = d.g[i] * d.view[i];
      i64 locals = (out.extents[i] + span - 1) / span;
      cap = checked_mul(cap, checked_mul(locals, d.g[i]));
    }
    out.bank_capacity = std::max(out.bank_capacity, cap);
  }
  out.per_df = std::move(per_df);
  return out;
}

BankingPlan build_banking(const FusedDesignSpec& spec, const InterconnectPlan& plan) {
  BankingPlan out;
  for (const auto& tp : plan.tensors) {
    std::vector<BankDims> per_df;
    for (size_t k = 0; k < spec.dataflows.size(); ++k) {
      std::vector<Vec> nodes;
      for (const auto& [fu, dfs] : tp.data_nodes)
        if (dfs.count(int(k))) nodes.push_back(fu);
      per_df.push_back(bank_analysis(spec, spec.dataflows[k], tp.tensor, nodes));
    }
    out.tensors.push_back(fuse_banking(spec, tp.tensor, std::move(per_df)));
  }
  return out;
}

i64 bank_of(const Vec& d, const BankDims& dims) {
  Vec b(d.size());
  for (size_t i = 0; i < d.size(); ++i) b[i] = (d[i] / dims.g[i]) % dims.view[i];
  return linearize(b, dims.view);
}

i64 bank_addr(const Vec& d, const BankDims& dims, const Vec& extents) {
  Vec locals(d.size()), local_dims(d.size());
  Vec offs(d.size()), off_dims(d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    i64 q = d[i] / dims.g[i];
    locals[i] = q / dims.view[i];
    i64 span = dims.g[i] * dims.view[i];
    local_dims[i] = (extents[i] + span - 1) / span;
    offs[i] = d[i] % dims.g[i];
    off_dims[i] = dims.g[i];
  }
  return checked_add(checked_mul(linearize(locals, local_dims), vec_product(off_dims)),
                     linearize(offs, off_dims));
}

SwitchFabric build_switches(const FusedDesignSpec& spec, const InterconnectPlan& plan,
                            const BankingPlan& banking,
                            std::vector<std::string>* diagnostics, i64 fan_in_limit) {
  SwitchFabric fab;
  for (const auto& tp : plan.tensors) {
    const TensorBanking& tb = banking.of(tp.tensor);
    const TensorDecl& decl = spec.workload.tensor(tp.tensor);
    for (const auto& [fu, dfs] : tp.data_nodes) {
      SwitchFabric::Port port;
      port.tensor = tp.tensor;
      port.fu = fu;
      port.write = tp.is_output;
      port.banks_per_df.resize(spec.dataflows.size());
      for (int k : dfs) {
        const DataflowSpec& df = spec.dataflows[k];
        AffineMap ts = decl.access.compose(df.map_ts());
        for_each_point(df.for_sizes, [&](const Vec& t) {
          Vec p = t;
          p.insert(p.end(), fu.begin(), fu.end());
          port.banks_per_df[k].insert(bank_of(ts.apply(p), tb.per_df[k]));
        });
        if (fan_in_limit > 0 && i64(port.banks_per_df[k].size()) > fan_in_limit &&
            diagnostics)
          diagnostics->push_back("tensor " + tp.tensor + " node " + vec_str(fu) +
                                 " addresses " +
                                 std::to_string(port.banks_per_df[k].size()) +
                                 " banks, over the fan-in limit of " +
                                 std::to_string(fan_in_limit));
      }
      fab.ports.push_back(std::move(port));
    }
  }
  return fab;
}

std::vector<std::string> check_bank_conflicts(const FusedDesignSpec& spec,
                                              const InterconnectPlan& plan,
                                              const BankingPlan& banking) {
  std::vector<std::string> issues;
  for (const auto& tp : plan.tensors) {
    const TensorBanking& tb = banking.of(tp.tensor);
    const TensorDecl& decl = spec.workload.tensor(tp.tensor);
    for (size_t k = 0; k < spec.dataflows.size(); ++k) {
      const DataflowSpec& df = spec.dataflows[k];
      std::vector<Vec> nodes;
      for (const auto& [fu, dfs] : tp.data_nodes)
        if (dfs.count(int(k))) nodes.push_back(fu);
      if (nodes.size() < 2) continue;
      AffineMap ts = decl.access.compose(df.map_ts());
      bool bad = false;
      for_each_point(df.for_sizes, [&](const Vec& t) {
        if (bad) return;
        std::map<i64, Vec> seen;  // bank -> index
        for (const Vec& fu : nodes) {
          Vec p = t;
          p.insert(p.end(), fu.begin(), fu.end());
          Vec d = ts.apply(p);
          i64 bank = bank_of(d, tb.per_df[k]);
          auto [it, fresh] = seen.emplace(bank, d);
          if (!fresh && it->second != d) {
            issues.push_back("tensor " + tp.tensor + " dataflow " + df.name +
                             " t=" + vec_str(t) + ": bank " + std::to_string(bank) +
                             " hit by " + vec_str(it->second) + " and " + vec_str(d));
            bad = true;
          }
        }
      });
    }
  }
  return issues;
}

}  // namespace tessera
