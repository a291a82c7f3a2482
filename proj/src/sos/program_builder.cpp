#include "crashcert/sos/program_builder.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "crashcert/poly/poly_json.hpp"

namespace crashcert {

std::uint64_t gram_basis_size(int n_vars, int d) {
  if (n_vars < 1) throw std::invalid_argument("gram_basis_size: n_vars must be >= 1");
  if (d < 0) throw std::invalid_argument("gram_basis_size: degree must be >= 0");
  return binomial(static_cast<std::uint64_t>(n_vars + d), static_cast<std::uint64_t>(d));
}

Polynomial SosSolution::extract(const LinearPolynomial& p) const {
  if (!is_solved(status)) {
    throw std::logic_error("cannot extract from a " + to_string(status) + " solution");
  }
  return p.evaluate(std::span<const double>(values));
}

double SosSolution::extract(const AffineExpr& e) const {
  if (!is_solved(status)) {
    throw std::logic_error("cannot extract from a " + to_string(status) + " solution");
  }
  return e.evaluate(std::span<const double>(values));
}

int ProgramBuilder::add_free() {
  vars_.push_back({Kind::free, -1, -1});
  return static_cast<int>(vars_.size()) - 1;
}

int ProgramBuilder::add_nonneg() {
  vars_.push_back({Kind::nonneg, -1, -1});
  return static_cast<int>(vars_.size()) - 1;
}

LinearPolynomial ProgramBuilder::free_polynomial(const VariableSpace& space,
                                                 std::span<const int> vars,
                                                 int degree) {
  const auto monos = monomials_up_to(vars, degree);
  std::vector<int> ids;
  ids.reserve(monos.size());
  for (std::size_t k = 0; k < monos.size(); ++k) ids.push_back(add_free());
  return LinearPolynomial::from_variables(space, monos, ids);
}

int ProgramBuilder::shape_for(const BasicSemialgebraicSet& K, int d,
                              std::vector<int> vars) {
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  std::string key = to_json(K.space()).dump() + "|" + to_json(K).dump() + "|" +
                    std::to_string(d) + "|";
  for (int v : vars) key += std::to_string(v) + ",";
  if (auto it = shape_cache_.find(key); it != shape_cache_.end()) return it->second;

  WsosShape sh;
  sh.space = K.space();
  sh.vars = vars;
  sh.degree = d;
  sh.blocks.push_back({monomials_up_to(vars, d), Polynomial::constant(K.space(), 1.0)});
  for (const auto& g : K.inequalities()) {
    const int room = 2 * d - g.degree();
    if (room < 0) continue;
    sh.blocks.push_back({monomials_up_to(vars, room / 2), g});
  }
  for (const auto& h : K.equalities()) {
    const int room = 2 * d - h.degree();
    if (room < 0) continue;
    sh.thetas.emplace_back(h, monomials_up_to(vars, room));
  }

  // Product groups per block and the coefficient support.
  std::vector<std::map<Exponent, int, GradedOrder>> groups(sh.blocks.size());
  std::set<Exponent, GradedOrder> support;
  for (std::size_t b = 0; b < sh.blocks.size(); ++b) {
    const auto& basis = sh.blocks[b].basis;
    for (std::size_t j = 0; j < basis.size(); ++j) {
      for (std::size_t i = j; i < basis.size(); ++i) groups[b].emplace(basis[i] + basis[j], 0);
    }
    int g = 0;
    for (auto& [mono, idx] : groups[b]) {
      idx = g++;
      for (const auto& [e, c] : sh.blocks[b].weight.terms()) support.insert(mono + e);
    }
  }
  sh.coef_monomials.assign(support.begin(), support.end());
  for (std::size_t m = 0; m < sh.coef_monomials.size(); ++m) {
    sh.coef_index.emplace(sh.coef_monomials[m], static_cast<int>(m));
  }
  sh.gram.coef_dim = static_cast<int>(sh.coef_monomials.size());
  sh.expansion.assign(sh.coef_monomials.size(), {});
  for (std::size_t b = 0; b < sh.blocks.size(); ++b) {
    const auto& basis = sh.blocks[b].basis;
    const int n = static_cast<int>(basis.size());
    GramTemplate::Block gb;
    gb.order = n;
    gb.num_groups = static_cast<int>(groups[b].size());
    for (int j = 0; j < n; ++j) {
      for (int i = j; i < n; ++i) gb.entry_group.push_back(groups[b].at(basis[i] + basis[j]));
    }
    gb.psi_ptr.push_back(0);
    for (const auto& [mono, idx] : groups[b]) {
      for (const auto& [e, c] : sh.blocks[b].weight.terms()) {
        gb.psi_index.push_back(sh.coef_index.at(mono + e));
        gb.psi_coef.push_back(c);
      }
      gb.psi_ptr.push_back(static_cast<int>(gb.psi_index.size()));
    }
    int entry = 0;
    for (int j = 0; j < n; ++j) {
      for (int i = j; i < n; ++i, ++entry) {
        const int g = gb.entry_group[entry];
        const double scale = i == j ? 1.0 : kSqrt2;
        for (int q = gb.psi_ptr[g]; q < gb.psi_ptr[g + 1]; ++q) {
          sh.expansion[gb.psi_index[q]].push_back(
              {static_cast<int>(b), entry, scale * gb.psi_coef[q]});
        }
      }
    }
    sh.gram.blocks.push_back(std::move(gb));
  }
  shapes_.push_back(std::move(sh));
  const int id = static_cast<int>(shapes_.size()) - 1;
  shape_cache_.emplace(std::move(key), id);
  return id;
}

WsosHandle ProgramBuilder::wsos_polynomial(const BasicSemialgebraicSet& K, int d,
                                           std::span<const int> extra_vars) {
  if (d < 0) throw std::invalid_argument("WSOS degree must be >= 0");
  std::vector<int> vars = K.variables();
  vars.insert(vars.end(), extra_vars.begin(), extra_vars.end());
  const int s = shape_for(K, d, std::move(vars));
  const int inst = static_cast<int>(instances_.size());
  instances_.push_back({s, static_cast<int>(vars_.size())});
  const WsosShape& sh = shapes_[s];
  std::vector<int> ids;
  ids.reserve(sh.coef_monomials.size());
  for (std::size_t m = 0; m < sh.coef_monomials.size(); ++m) {
    ids.push_back(static_cast<int>(vars_.size()));
    vars_.push_back({Kind::virt, inst, static_cast<int>(m)});
  }
  WsosHandle h;
  h.instance = inst;
  h.poly = LinearPolynomial::from_variables(sh.space, sh.coef_monomials, ids);
  for (const auto& [hpoly, monos] : shapes_[s].thetas) {
    std::vector<int> tid;
    for (std::size_t k = 0; k < monos.size(); ++k) tid.push_back(add_free());
    h.poly += LinearPolynomial::from_variables(sh.space, monos, tid) * hpoly;
  }
  return h;
}

WsosHandle ProgramBuilder::constrain_wsos(const LinearPolynomial& p,
                                          const BasicSemialgebraicSet& K, int d,
                                          const std::string& label) {
  check_ids(p);
  if (p.degree() > 2 * d) {
    throw std::invalid_argument(label + ": polynomial degree " + std::to_string(p.degree()) +
                                " exceeds certificate degree " + std::to_string(2 * d));
  }
  const BasicSemialgebraicSet Kp = K.space() == p.space() ? K : K.embedded(p.space());
  std::vector<int> extra;
  for (int v = 0; v < p.space().size(); ++v) {
    if (p.depends_on(v)) extra.push_back(v);
  }
  WsosHandle h = wsos_polynomial(Kp, d, extra);
  constrain_zero(p - h.poly, label);
  return h;
}

void ProgramBuilder::constrain_zero(const LinearPolynomial& p, const std::string& label) {
  check_ids(p);
  families_.push_back({label, p});
}

void ProgramBuilder::constrain_equal(const AffineExpr& e, const std::string& label) {
  LinearPolynomial p{VariableSpace(1)};
  p.add_constant(e);
  constrain_zero(p, label);
}

void ProgramBuilder::set_objective(const AffineExpr& e, Sense sense) {
  for (const auto& [id, a] : e.linear()) {
    if (id < 0 || id >= num_variables()) throw std::out_of_range("objective uses unknown variable");
  }
  objective_ = e;
  sense_ = sense;
}

const WsosShape& ProgramBuilder::shape_of(const WsosHandle& h) const {
  return shapes_.at(static_cast<std::size_t>(instances_.at(static_cast<std::size_t>(h.instance)).shape));
}

std::vector<std::string> ProgramBuilder::family_labels() const {
  std::vector<std::string> out;
  for (const auto& f : families_) out.push_back(f.label);
  return out;
}

void ProgramBuilder::check_ids(const LinearPolynomial& p) const {
  for (const auto& [e, expr] : p.terms()) {
    for (const auto& [id, a] : expr.linear()) {
      if (id < 0 || id >= num_variables()) {
        throw std::out_of_range("polynomial uses unknown decision variable " + std::to_string(id));
      }
    }
  }
}

ProgramBuilder::Layout ProgramBuilder::layout() const {
  Layout L;
  L.col.assign(vars_.size(), -1);
  for (std::size_t id = 0; id < vars_.size(); ++id) {
    if (vars_[id].kind == Kind::free) L.col[id] = L.num_free++;
  }
  for (std::size_t id = 0; id < vars_.size(); ++id) {
    if (vars_[id].kind == Kind::nonneg) L.col[id] = L.num_free + L.num_nonneg++;
  }
  int next = L.num_free + L.num_nonneg;
  int cone = (L.num_free > 0 ? 1 : 0) + (L.num_nonneg > 0 ? 1 : 0);
  L.gram_col.resize(instances_.size());
  L.gram_cone.resize(instances_.size());
  for (std::size_t I = 0; I < instances_.size(); ++I) {
    for (const auto& blk : shapes_[instances_[I].shape].gram.blocks) {
      L.gram_col[I].push_back(next);
      L.gram_cone[I].push_back(cone++);
      next += blk.order * (blk.order + 1) / 2;
    }
  }
  L.num_cols = next;
  return L;
}

namespace {

struct LayerKey {
  int family;
  Exponent shift;
  bool operator<(const LayerKey& o) const {
    if (family != o.family) return family < o.family;
    return GradedOrder{}(shift, o.shift);
  }
};

}  // namespace

ConicProgram ProgramBuilder::assemble(AssemblyInfo* info) const {
  const Layout L = layout();
  ConicProgram prog;
  if (L.num_free > 0) prog.cones.push_back({ConeType::free, L.num_free});
  if (L.num_nonneg > 0) prog.cones.push_back({ConeType::nonneg, L.num_nonneg});
  for (const auto& inst : instances_) {
    for (const auto& blk : shapes_[inst.shape].gram.blocks) {
      prog.cones.push_back({ConeType::psd, blk.order});
    }
  }
  prog.c.assign(static_cast<std::size_t>(L.num_cols), 0.0);
  std::vector<char> referenced(vars_.size(), 0);

  auto expand = [&](int id, double a, auto&& emit) {
    const Var& v = vars_[static_cast<std::size_t>(id)];
    if (v.kind != Kind::virt) {
      emit(L.col[id], a);
      return;
    }
    const WsosShape& sh = shapes_[instances_[v.instance].shape];
    for (const auto& ct : sh.expansion[v.coef]) {
      emit(L.gram_col[v.instance][ct.block] + ct.entry, a * ct.value);
    }
  };

  const double sgn = sense_ == Sense::maximize ? -1.0 : 1.0;
  prog.offset = sgn * objective_.constant();
  for (const auto& [id, a] : objective_.linear()) {
    referenced[id] = 1;
    expand(id, sgn * a, [&](int col, double val) { prog.c[col] += val; });
  }

  // Per-shape layer tracking.
  struct Track {
    std::map<LayerKey, int> layers;
    std::vector<LayerKey> keys;
    std::map<int, int> local;  // instance -> local index
    std::vector<std::map<int, std::pair<double, int>>> coef;  // per local instance
    bool ok = true;
  };
  std::vector<Track> track(shapes_.size());
  for (std::size_t I = 0; I < instances_.size(); ++I) {
    Track& t = track[instances_[I].shape];
    t.local.emplace(static_cast<int>(I), static_cast<int>(t.coef.size()));
    t.coef.emplace_back();
  }

  std::vector<std::map<Exponent, int, GradedOrder>> row_of(families_.size());
  int row = 0;
  for (std::size_t f = 0; f < families_.size(); ++f) {
    for (const auto& [alpha, expr] : families_[f].poly.terms()) {
      row_of[f].emplace(alpha, row);
      prog.b.push_back(-expr.constant());
      for (const auto& [id, a] : expr.linear()) {
        referenced[id] = 1;
        expand(id, a, [&](int col, double val) { prog.A.add(row, col, val); });
        const Var& v = vars_[static_cast<std::size_t>(id)];
        if (v.kind != Kind::virt) continue;
        Track& t = track[instances_[v.instance].shape];
        if (!t.ok) continue;
        const Exponent& mono = shapes_[instances_[v.instance].shape].coef_monomials[v.coef];
        if (!alpha.divisible_by(mono)) {
          t.ok = false;
          continue;
        }
        const LayerKey key{static_cast<int>(f), alpha - mono};
        auto [it, fresh] = t.layers.emplace(key, static_cast<int>(t.keys.size()));
        if (fresh) t.keys.push_back(key);
        auto& slot = t.coef[t.local.at(v.instance)];
        auto [cit, first] = slot.emplace(it->second, std::make_pair(a, 1));
        if (!first) {
          if (cit->second.first != a) t.ok = false;
          ++cit->second.second;
        }
      }
      ++row;
    }
  }
  prog.num_rows = row;

  auto structure = std::make_shared<SchurStructure>();
  int structured = 0, unstructured = 0;
  for (std::size_t s = 0; s < shapes_.size(); ++s) {
    Track& t = track[s];
    if (t.coef.empty()) continue;
    const WsosShape& sh = shapes_[s];
    TemplateGroup grp;
    const int dim = sh.gram.coef_dim;
    for (const auto& key : t.keys) {
      std::vector<int> rows(static_cast<std::size_t>(dim), -1);
      for (int m = 0; m < dim; ++m) {
        const auto& rm = row_of[key.family];
        if (auto it = rm.find(sh.coef_monomials[m] + key.shift); it != rm.end()) {
          rows[m] = it->second;
        }
      }
      grp.layer_rows.push_back(std::move(rows));
    }
    const int T = static_cast<int>(t.keys.size());
    for (const auto& [I, r] : t.local) {
      grp.instance_cones.push_back(L.gram_cone[I]);
      for (int l = 0; l < T; ++l) {
        double a = 0.0;
        if (auto it = t.coef[r].find(l); it != t.coef[r].end()) {
          a = it->second.first;
          const int expected = static_cast<int>(std::count_if(
              grp.layer_rows[l].begin(), grp.layer_rows[l].end(), [](int q) { return q >= 0; }));
          if (it->second.second != expected) t.ok = false;
        }
        grp.coef.push_back(a);
      }
    }
    if (!t.ok || T == 0) {
      ++unstructured;
      continue;
    }
    grp.template_id = static_cast<int>(structure->templates.size());
    structure->templates.push_back(sh.gram);
    structure->groups.push_back(std::move(grp));
    ++structured;
  }
  if (!structure->groups.empty()) prog.structure = structure;

  if (info) {
    info->num_rows = prog.num_rows;
    info->num_free = L.num_free;
    info->num_nonneg = L.num_nonneg;
    info->psd_orders.clear();
    for (const auto& k : prog.cones) {
      if (k.type == ConeType::psd) info->psd_orders.push_back(k.size);
    }
    info->structured_templates = structured;
    info->unstructured_templates = unstructured;
    info->warnings.clear();
    for (std::size_t id = 0; id < vars_.size(); ++id) {
      if (vars_[id].kind != Kind::virt && !referenced[id]) {
        info->warnings.push_back("decision variable " + std::to_string(id) +
                                 " is never constrained or used in the objective");
      }
    }
  }
  return prog;
}

SosSolution ProgramBuilder::interpret(ConicSolution sol) const {
  const Layout L = layout();
  SosSolution out;
  out.status = sol.status;
  const double sgn = sense_ == Sense::maximize ? -1.0 : 1.0;
  if (sol.objective) out.objective = sgn * *sol.objective;
  out.values.assign(vars_.size(), 0.0);
  if (static_cast<int>(sol.x.size()) == L.num_cols) {
    for (std::size_t id = 0; id < vars_.size(); ++id) {
      const Var& v = vars_[id];
      if (v.kind != Kind::virt) {
        out.values[id] = sol.x[L.col[id]];
        continue;
      }
      const WsosShape& sh = shapes_[instances_[v.instance].shape];
      double acc = 0.0;
      for (const auto& ct : sh.expansion[v.coef]) {
        acc += ct.value * sol.x[L.gram_col[v.instance][ct.block] + ct.entry];
      }
      out.values[id] = acc;
    }
  }
  out.conic = std::move(sol);
  return out;
}

SosSolution ProgramBuilder::solve(const SolverSettings& settings, AssemblyInfo* info) const {
  const ConicProgram prog = assemble(info);
  return interpret(solve_conic(prog, settings));
}

}  // namespace crashcert
