#include "tessera/parse.hpp"

#include <cctype>
#include <sstream>

#include <json.hpp>

namespace tessera {

using nlohmann::json;
using nlohmann::ordered_json;

std::string Diagnostic::str() const {
  std::ostringstream os;
  if (line > 0) os << "line " << line << ": ";
  if (!path.empty()) os << path << ": ";
  os << message;
  return os.str();
}

// ---- compute expression parser ---------------------------------------------

namespace {

struct ExprParser {
  const std::string& s;
  size_t pos = 0;

  explicit ExprParser(const std::string& text) : s(text) {}

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(const std::string& tok) {
    skip_ws();
    if (s.compare(pos, tok.size(), tok) == 0) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (pos == start)
      throw SpecError("compute expression: expected identifier at offset " +
                      std::to_string(pos) + " in \"" + s + "\"");
    return s.substr(start, pos - start);
  }

  std::shared_ptr<ComputeExpr::Node> factor() {
    skip_ws();
    if (eat("(")) {
      auto n = term();
      if (!eat(")")) throw SpecError("compute expression: missing ')' in \"" + s + "\"");
      return n;
    }
    auto n = std::make_shared<ComputeExpr::Node>();
    n->op = ComputeExpr::Op::Operand;
    n->tensor = ident();
    return n;
  }

  std::shared_ptr<ComputeExpr::Node> term() {
    auto lhs = factor();
    while (true) {
      skip_ws();
      ComputeExpr::Op op;
      if (eat("*")) op = ComputeExpr::Op::Mul;
      else if (eat("<<")) op = ComputeExpr::Op::Shl;
      else break;
      auto n = std::make_shared<ComputeExpr::Node>();
      n->op = op;
      n->lhs = std::move(lhs);
      n->rhs = factor();
      lhs = std::move(n);
    }
    return lhs;
  }
};

}  // namespace

ComputeExpr parse_compute_expr(const std::string& text) {
  ComputeExpr e;
  e.text = text;
  ExprParser p(text);
  e.accumulator = p.ident();
  if (!p.eat("+="))
    throw SpecError("compute expression must have the form \"OUT += ...\": \"" +
                    text + "\"");
  e.root = p.term();
  p.skip_ws();
  if (p.pos != text.size())
    throw SpecError("compute expression: trailing characters at offset " +
                    std::to_string(p.pos) + " in \"" + text + "\"");
  return e;
}

static std::string expr_to_text(const ComputeExpr::Node& n, bool parens) {
  if (n.op == ComputeExpr::Op::Operand) return n.tensor;
  std::string op = n.op == ComputeExpr::Op::Mul ? " * " : " << ";
  std::string body = expr_to_text(*n.lhs, n.lhs->op == ComputeExpr::Op::Shl) + op +
                     expr_to_text(*n.rhs, n.rhs->op != ComputeExpr::Op::Operand);
  return parens ? "(" + body + ")" : body;
}

// ---- JSON -> spec -----------------------------------------------------------

namespace {

int line_of_offset(const std::string& text, size_t offset) {
  int line = 1;
  for (size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

class SpecReader {
public:
  explicit SpecReader(const json& j) : j_(j) {}

  FusedDesignSpec read() {
    FusedDesignSpec spec;
    const json& w = get(j_, "workload", "");
    read_workload(w, spec.workload);
    const json& dfs = get(j_, "dataflows", "");
    require(dfs.is_array(), "dataflows", "must be an array");
    if (dfs.empty()) fail("dataflows", "dataflows must be non-empty");
    for (size_t k = 0; k < dfs.size(); ++k)
      spec.dataflows.push_back(
          read_dataflow(dfs[k], "dataflows[" + std::to_string(k) + "]",
                        spec.workload.n_iter()));
    if (j_.contains("hardware")) read_hardware(j_["hardware"], spec.hardware);
    return spec;
  }

private:
  const json& j_;

  [[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw SpecError(path.empty() ? msg : path + ": " + msg);
  }
  void require(bool cond, const std::string& path, const std::string& msg) {
    if (!cond) fail(path, msg);
  }
  const json& get(const json& o, const char* key, const std::string& path) {
    std::string p = path.empty() ? key : path + "." + key;
    if (!o.is_object() || !o.contains(key)) fail(p, "missing required field");
    return o[key];
  }

  i64 to_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<i64>();
  }

  Vec to_vec(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an integer array");
    Vec out;
    for (size_t i = 0; i < v.size(); ++i)
      out.push_back(to_int(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  AffineMap to_matrix(const json& m, const json* bias, const std::string& path) {
    if (!m.is_array() || m.empty()) fail(path, "expected a non-empty row-major matrix");
    size_t cols = 0;
    std::vector<Vec> rows;
    for (size_t r = 0; r < m.size(); ++r) {
      Vec row = to_vec(m[r], path + "[" + std::to_string(r) + "]");
      if (r == 0) cols = row.size();
      else if (row.size() != cols) fail(path, "ragged matrix rows");
      rows.push_back(std::move(row));
    }
    if (cols == 0) fail(path, "matrix rows must be non-empty");
    AffineMap map(int(m.size()), int(cols));
    for (size_t r = 0; r < rows.size(); ++r)
      for (size_t c = 0; c < cols; ++c) map.at(int(r), int(c)) = rows[r][c];
    if (bias) {
      Vec b = to_vec(*bias, path + " bias");
      if (b.size() != rows.size()) fail(path, "bias length does not match matrix rows");
      map.bias_vec() = b;
    }
    return map;
  }

  void read_workload(const json& w, WorkloadSpec& out) {
    const json& dims = get(w, "iter_dims", "workload");
    require(dims.is_array() && !dims.empty(), "workload.iter_dims",
            "must be a non-empty string array");
    for (const auto& d : dims) {
      require(d.is_string(), "workload.iter_dims", "entries must be strings");
      out.iter_dims.push_back(d.get<std::string>());
    }
    const json& ts = get(w, "tensors", "workload");
    require(ts.is_array(), "workload.tensors", "must be an array");
    for (size_t i = 0; i < ts.size(); ++i) {
      std::string path = "workload.tensors[" + std::to_string(i) + "]";
      const json& t = ts[i];
      TensorDecl decl;
      decl.name = get(t, "name", path).get<std::string>();
      std::string role = get(t, "role", path).get<std::string>();
      if (role == "input") decl.role = TensorRole::Input;
      else if (role == "output") decl.role = TensorRole::Output;
      else fail(path + ".role", "must be \"input\" or \"output\"");
      const json* bias = t.contains("bias") ? &t["bias"] : nullptr;
      decl.access = to_matrix(get(t, "matrix", path), bias, path + ".matrix");
      decl.element_width = int(to_int(get(t, "width", path), path + ".width"));
      decl.element_signed = get(t, "signed", path).get<bool>();
      out.tensors.push_back(std::move(decl));
    }
    const json& c = get(w, "compute", "workload");
    std::string expr = get(c, "expr", "workload.compute").get<std::string>();
    out.compute = parse_compute_expr(expr);
    std::string declared_out = get(c, "out", "workload.compute").get<std::string>();
    if (declared_out != out.compute.accumulator)
      fail("workload.compute.out", "does not match the expression accumulator '" +
                                       out.compute.accumulator + "'");
  }

  DataflowSpec read_dataflow(const json& d, const std::string& path, int /*n_i*/) {
    DataflowSpec df;
    df.name = get(d, "name", path).get<std::string>();
    df.for_sizes = to_vec(get(d, "for_sizes", path), path + ".for_sizes");
    df.par_sizes = to_vec(get(d, "par_sizes", path), path + ".par_sizes");
    df.map_t = to_matrix(get(d, "M_T", path), nullptr, path + ".M_T");
    df.map_s = to_matrix(get(d, "M_S", path), nullptr, path + ".M_S");
    df.control = to_vec(get(d, "control", path), path + ".control");
    if (df.map_t.n_in() != int(df.for_sizes.size()))
      fail(path + ".M_T", "column count must equal len(for_sizes)");
    if (df.map_s.n_in() != int(df.par_sizes.size()))
      fail(path + ".map_s", "column count must equal len(par_sizes)");
    return df;
  }

  void read_hardware(const json& h, HardwareConfig& out) {
    if (h.contains("d_S")) out.d_s = to_int(h["d_S"], "hardware.d_S");
    if (h.contains("root_penalty") && !h["root_penalty"].is_null())
      out.root_penalty = to_int(h["root_penalty"], "hardware.root_penalty");
    if (h.contains("strict_delay_bias"))
      out.strict_delay_bias = h["strict_delay_bias"].get<bool>();
    if (h.contains("chains_longest_first"))
      out.chains_longest_first = h["chains_longest_first"].get<bool>();
    if (h.contains("data_width"))
      for (auto it = h["data_width"].begin(); it != h["data_width"].end(); ++it)
        out.data_width_overrides[it.key()] =
            int(to_int(it.value(), "hardware.data_width." + it.key()));
  }
};

}  // namespace

ParseResult parse_spec(const std::string& text) {
  ParseResult res;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    Diagnostic d;
    d.line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    d.message = e.what();
    res.diagnostics.push_back(d);
    return res;
  }
  try {
    SpecReader reader(j);
    res.spec = reader.read();
    std::vector<std::string> warnings;
    validate_spec(res.spec, &warnings);
    for (const auto& w : warnings) res.diagnostics.push_back({0, "", w});
    res.ok = true;
  } catch (const SpecError& e) {
    std::string msg = e.what();
    Diagnostic d;
    auto colon = msg.find(": ");
    // Split "path: message" shape back apart when present.
    if (colon != std::string::npos && msg.find(' ') > colon) {
      d.path = msg.substr(0, colon);
      d.message = msg.substr(colon + 2);
    } else {
      d.message = msg;
    }
    res.diagnostics.push_back(d);
  }
  return res;
}

FusedDesignSpec parse_spec_or_throw(const std::string& text) {
  ParseResult r = parse_spec(text);
  if (!r.ok) throw SpecError(r.diagnostics.empty() ? "invalid spec"
                                                   : r.diagnostics[0].str());
  return r.spec;
}

// ---- spec -> JSON -----------------------------------------------------------

static ordered_json matrix_json(const AffineMap& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.n_out(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.n_in(); ++c) row.push_back(m.at(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::string serialize_spec(const FusedDesignSpec& spec) {
  ordered_json j;
  ordered_json w;
  w["iter_dims"] = spec.workload.iter_dims;
  ordered_json ts = ordered_json::array();
  for (const auto& t : spec.workload.tensors) {
    ordered_json tj;
    tj["name"] = t.name;
    tj["role"] = t.role == TensorRole::Output ? "output" : "input";
    tj["matrix"] = matrix_json(t.access);
    bool nonzero_bias = false;
    for (i64 b : t.access.bias_vec()) nonzero_bias |= b != 0;
    if (nonzero_bias) tj["bias"] = t.access.bias_vec();
    tj["width"] = t.element_width;
    tj["signed"] = t.element_signed;
    ts.push_back(tj);
  }
  w["tensors"] = ts;
  w["compute"] = {{"out", spec.workload.compute.accumulator},
                  {"expr", spec.workload.compute.accumulator + " += " +
                               expr_to_text(*spec.workload.compute.root, false)}};
  j["workload"] = w;
  ordered_json dfs = ordered_json::array();
  for (const auto& df : spec.dataflows) {
    ordered_json dj;
    dj["name"] = df.name;
    dj["for_sizes"] = df.for_sizes;
    dj["par_sizes"] = df.par_sizes;
    dj["M_T"] = matrix_json(df.map_t);
    dj["M_S"] = matrix_json(df.map_s);
    dj["control"] = df.control;
    dfs.push_back(dj);
  }
  j["dataflows"] = dfs;
  ordered_json h;
  h["d_S"] = spec.hardware.d_s;
  if (spec.hardware.root_penalty) h["root_penalty"] = *spec.hardware.root_penalty;
  else h["root_penalty"] = nullptr;
  if (spec.hardware.strict_delay_bias) h["strict_delay_bias"] = true;
  if (spec.hardware.chains_longest_first) h["chains_longest_first"] = true;
  if (!spec.hardware.data_width_overrides.empty()) {
    ordered_json dw;
    for (const auto& [k, v] : spec.hardware.data_width_overrides) dw[k] = v;
    h["data_width"] = dw;
  }
  j["hardware"] = h;
  return j.dump(2) + "\n";
}

}  // namespace tessera
