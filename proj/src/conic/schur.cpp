#include "crashcert/conic/schur.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <omp.h>

namespace crashcert {

namespace {

// Lower entry (i, j), i >= j, of svec index e in an order-n matrix.
void svec_entry(int n, int e, int& i, int& j) {
  j = 0;
  int col_len = n;
  while (e >= col_len) {
    e -= col_len;
    ++j;
    --col_len;
  }
  i = j + e;
}

// M0[mu, nu] = tr(E_mu X E_nu S^-1) for the product-group indicator
// matrices E of one Gram block.
template <typename Block>
void group_moment_matrix(const Block& blk, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Sinv, bool parallel,
                         Eigen::MatrixXd& M0) {
  const int n = blk.order;
  const int ng = blk.num_groups;
  M0.setZero(ng, ng);
  const int n_lower = n * (n + 1) / 2;
#pragma omp parallel if (parallel)
  {
    Eigen::MatrixXd Xg, Sg, G;
#pragma omp for schedule(dynamic, 4)
    for (int nu = 0; nu < ng; ++nu) {
      const int p0 = blk.pair_ptr[nu];
      const int np = blk.pair_ptr[nu + 1] - p0;
      Xg.resize(n, np);
      Sg.resize(np, n);
      for (int p = 0; p < np; ++p) {
        Xg.col(p) = X.col(blk.pair_k[p0 + p]);
        Sg.row(p) = Sinv.row(blk.pair_l[p0 + p]);
      }
      G.noalias() = Xg * Sg;  // X E_nu S^-1
      auto col = M0.col(nu);
      int e = 0;
      for (int j = 0; j < n; ++j) {
        col(blk.entry_group[e]) += G(j, j);
        ++e;
        for (int i = j + 1; i < n; ++i, ++e) {
          col(blk.entry_group[e]) += G(j, i) + G(i, j);
        }
      }
      (void)n_lower;
    }
  }
}

}  // namespace

SchurAssembler::SchurAssembler(const ConicProgram& prog,
                               const std::vector<int>& row_map, int num_rows)
    : m_(num_rows) {
  const auto offsets = prog.cone_offsets();
  // Column -> (kind, local index) lookup.
  const int nvar = prog.num_vars();
  std::vector<int> col_kind(static_cast<std::size_t>(nvar), -1);  // -1 free
  std::vector<int> col_local(static_cast<std::size_t>(nvar), 0);
  std::vector<int> psd_of_cone(prog.cones.size(), -1);
  for (std::size_t k = 0; k < prog.cones.size(); ++k) {
    const auto& cone = prog.cones[k];
    if (cone.type == ConeType::nonneg) {
      for (int v = 0; v < cone.size; ++v) {
        col_kind[offsets[k] + v] = 0;
        col_local[offsets[k] + v] = static_cast<int>(lin_cols_.size());
        lin_cols_.emplace_back();
      }
    } else if (cone.type == ConeType::psd) {
      psd_of_cone[k] = static_cast<int>(psd_.size());
      PsdCone pc;
      pc.order = cone.size;
      psd_.push_back(std::move(pc));
      for (int v = 0; v < cone.num_vars(); ++v) {
        col_kind[offsets[k] + v] = 1 + psd_of_cone[k];
        col_local[offsets[k] + v] = v;
      }
    }
  }

  // Per PSD cone: row -> entries.
  std::vector<std::map<int, std::vector<std::pair<int, double>>>> by_row(psd_.size());
  for (std::size_t t = 0; t < prog.A.nnz(); ++t) {
    const int col = prog.A.cols[t];
    const int kind = col_kind[col];
    if (kind < 0) continue;
    const int r = row_map[prog.A.rows[t]];
    if (r < 0) throw std::logic_error("dropped row touches a cone variable");
    if (kind == 0) {
      auto& lc = lin_cols_[col_local[col]];
      lc.rows.push_back(r);
      lc.vals.push_back(prog.A.vals[t]);
    } else {
      by_row[kind - 1][r].emplace_back(col_local[col], prog.A.vals[t]);
    }
  }
  for (std::size_t k = 0; k < psd_.size(); ++k) {
    auto& pc = psd_[k];
    pc.ptr.push_back(0);
    for (auto& [r, ents] : by_row[k]) {
      // Merge duplicate svec entries within a row.
      std::sort(ents.begin(), ents.end());
      pc.rows.push_back(r);
      for (std::size_t q = 0; q < ents.size(); ++q) {
        double v = ents[q].second;
        while (q + 1 < ents.size() && ents[q + 1].first == ents[q].first) {
          v += ents[++q].second;
        }
        int i = 0, j = 0;
        svec_entry(pc.order, ents[q].first, i, j);
        pc.ei.push_back(i);
        pc.ej.push_back(j);
        pc.ea.push_back(i == j ? v : v / kSqrt2);
      }
      pc.ptr.push_back(static_cast<int>(pc.ei.size()));
    }
  }

  if (!prog.structure) return;
  const auto& st = *prog.structure;
  for (const auto& grp : st.groups) {
    const auto& tmpl = st.templates.at(static_cast<std::size_t>(grp.template_id));
    PreparedGroup pg;
    pg.coef_dim = tmpl.coef_dim;
    for (const auto& b : tmpl.blocks) {
      PreparedBlock pb;
      pb.order = b.order;
      pb.num_groups = b.num_groups;
      pb.entry_group = b.entry_group;
      pb.source = &b;
      std::vector<std::vector<std::pair<int, int>>> pairs(
          static_cast<std::size_t>(b.num_groups));
      int e = 0;
      for (int j = 0; j < b.order; ++j) {
        for (int i = j; i < b.order; ++i, ++e) {
          auto& pl = pairs[static_cast<std::size_t>(b.entry_group[e])];
          pl.emplace_back(i, j);
          if (i != j) pl.emplace_back(j, i);
        }
      }
      pb.pair_ptr.push_back(0);
      for (const auto& pl : pairs) {
        for (const auto& [k, l] : pl) {
          pb.pair_k.push_back(k);
          pb.pair_l.push_back(l);
        }
        pb.pair_ptr.push_back(static_cast<int>(pb.pair_k.size()));
      }
      pg.blocks.push_back(std::move(pb));
    }
    for (const auto& inst : grp.instance_cones) {
      std::vector<int> ks;
      for (std::size_t b = 0; b < inst.size(); ++b) {
        const int k = psd_of_cone.at(static_cast<std::size_t>(inst[b]));
        if (k < 0 || psd_[k].order != tmpl.blocks[b].order) {
          throw std::invalid_argument("structure hint does not match cone " +
                                      std::to_string(inst[b]));
        }
        if (psd_[k].structured) {
          throw std::invalid_argument("cone covered by two structure hints");
        }
        psd_[k].structured = true;
        ks.push_back(k);
      }
      pg.instance_psd.push_back(std::move(ks));
    }
    for (const auto& lr : grp.layer_rows) {
      std::vector<int> mapped(lr.size(), -1);
      for (std::size_t q = 0; q < lr.size(); ++q) {
        if (lr[q] < 0) continue;
        mapped[q] = row_map[lr[q]];
        if (mapped[q] < 0) throw std::logic_error("structure hint uses a dropped row");
      }
      pg.layer_rows.push_back(std::move(mapped));
    }
    pg.coef = grp.coef;
    groups_.push_back(std::move(pg));
  }
}

int SchurAssembler::num_structured() const {
  int n = 0;
  for (const auto& pc : psd_) n += pc.structured ? 1 : 0;
  return n;
}

void SchurAssembler::generic_cone(const PsdCone& cone, const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& Sinv, bool parallel,
                                  Eigen::MatrixXd& M) const {
  const int nr = static_cast<int>(cone.rows.size());
  const int n = cone.order;
#pragma omp parallel if (parallel)
  {
    Eigen::MatrixXd G(n, n);
#pragma omp for schedule(dynamic, 8)
    for (int q = 0; q < nr; ++q) {
      // G = X A_q S^-1
      G.setZero();
      for (int t = cone.ptr[q]; t < cone.ptr[q + 1]; ++t) {
        const int k = cone.ei[t], l = cone.ej[t];
        const double a = cone.ea[t];
        G.noalias() += a * X.col(k) * Sinv.row(l);
        if (k != l) G.noalias() += a * X.col(l) * Sinv.row(k);
      }
      const int rq = cone.rows[q];
      // Rows are ascending, so r >= q keeps us in the lower triangle and
      // each thread writes only column rq.
      for (int r = q; r < nr; ++r) {
        double v = 0.0;
        for (int t = cone.ptr[r]; t < cone.ptr[r + 1]; ++t) {
          const int i = cone.ei[t], j = cone.ej[t];
          v += cone.ea[t] * (i == j ? G(i, i) : G(j, i) + G(i, j));
        }
        M(cone.rows[r], rq) += v;
      }
    }
  }
}

void SchurAssembler::structured_group(const PreparedGroup& g,
                                      const SchurWeights& w,
                                      Eigen::MatrixXd& M) const {
  const int nz = g.coef_dim;
  const int R = static_cast<int>(g.instance_psd.size());
  const int T = static_cast<int>(g.layer_rows.size());
  const Eigen::Index packed = static_cast<Eigen::Index>(nz) * (nz + 1) / 2;
  Eigen::MatrixXd Zs(packed, R);
  const bool outer_parallel = R >= 2 * omp_get_max_threads() && R > 1;

  auto instance_matrix = [&](int r, bool inner_parallel, Eigen::MatrixXd& Z,
                             Eigen::MatrixXd& M0, Eigen::MatrixXd& Tm) {
    Z.setZero(nz, nz);
    for (std::size_t b = 0; b < g.blocks.size(); ++b) {
      const auto& blk = g.blocks[b];
      const int k = g.instance_psd[r][b];
      group_moment_matrix(blk, w.X[k], w.Sinv[k], inner_parallel, M0);
      const auto& src = *blk.source;
      // Tm = Psi M0, then Z += Tm Psi^T.
      Tm.setZero(nz, blk.num_groups);
      for (int gr = 0; gr < blk.num_groups; ++gr) {
        for (int p = src.psi_ptr[gr]; p < src.psi_ptr[gr + 1]; ++p) {
          Tm.row(src.psi_index[p]) += src.psi_coef[p] * M0.row(gr);
        }
      }
      for (int gr = 0; gr < blk.num_groups; ++gr) {
        for (int p = src.psi_ptr[gr]; p < src.psi_ptr[gr + 1]; ++p) {
          Z.col(src.psi_index[p]) += src.psi_coef[p] * Tm.col(gr);
        }
      }
    }
  };

#pragma omp parallel if (outer_parallel)
  {
    Eigen::MatrixXd Z, M0, Tm;
#pragma omp for schedule(dynamic, 1)
    for (int r = 0; r < R; ++r) {
      instance_matrix(r, !outer_parallel, Z, M0, Tm);
      Eigen::Index e = 0;
      for (int j = 0; j < nz; ++j) {
        for (int i = j; i < nz; ++i) Zs(e++, r) = Z(i, j);
      }
    }
  }

  // Aggregate over instances for every layer pair: A_tu = sum_r a_rt a_ru Z_r.
  std::vector<std::pair<int, int>> pairs;
  for (int t = 0; t < T; ++t) {
    for (int u = t; u < T; ++u) pairs.emplace_back(t, u);
  }
  const int P = static_cast<int>(pairs.size());
  Eigen::MatrixXd Wt(R, P);
  for (int r = 0; r < R; ++r) {
    for (int p = 0; p < P; ++p) {
      Wt(r, p) = g.coef[static_cast<std::size_t>(r) * T + pairs[p].first] *
                 g.coef[static_cast<std::size_t>(r) * T + pairs[p].second];
    }
  }
  Eigen::MatrixXd Agg;
  if (R == 1) {
    Agg = Zs * Wt;
  } else {
    Agg.resize(packed, P);
    // Column blocks are independent GEMMs; split the long dimension.
    const Eigen::Index chunk = 4096;
#pragma omp parallel for schedule(static)
    for (Eigen::Index s = 0; s < packed; s += chunk) {
      const Eigen::Index len = std::min(chunk, packed - s);
      Agg.middleRows(s, len).noalias() = Zs.middleRows(s, len) * Wt;
    }
  }

  // Scatter P_t A P_u^T (+ transpose for t != u) into the lower triangle.
  for (int p = 0; p < P; ++p) {
    const auto& rt = g.layer_rows[pairs[p].first];
    const auto& ru = g.layer_rows[pairs[p].second];
    const bool same = pairs[p].first == pairs[p].second;
    Eigen::Index e = 0;
    for (int j = 0; j < nz; ++j) {
      for (int i = j; i < nz; ++i, ++e) {
        const double a = Agg(e, p);
        if (a == 0.0) continue;
        // Entry (i, j) and, off the diagonal, its mirror (j, i).
        const int ri = rt[i], rj = rt[j], ui = ru[i], uj = ru[j];
        if (same) {
          if (ri < 0 || rj < 0) continue;
          M(std::max(ri, rj), std::min(ri, rj)) += (i == j || ri != rj) ? a : 2 * a;
        } else {
          // Full contribution C = P_t A P_u^T + P_u A P_t^T.
          auto add = [&](int r, int q) {
            if (r < 0 || q < 0) return;
            M(std::max(r, q), std::min(r, q)) += (r == q) ? 2 * a : a;
          };
          add(ri, uj);
          if (i != j) add(rj, ui);
        }
      }
    }
  }
}

void SchurAssembler::assemble(const SchurWeights& w, SchurKernel kernel,
                              Eigen::MatrixXd& M) const {
  M.setZero(m_, m_);
  // Nonnegative orthant: sum_k (x_k / s_k) a_k a_k^T.
  for (std::size_t k = 0; k < lin_cols_.size(); ++k) {
    const auto& c = lin_cols_[k];
    const double d = w.lin[static_cast<Eigen::Index>(k)];
    for (std::size_t p = 0; p < c.rows.size(); ++p) {
      for (std::size_t q = 0; q < c.rows.size(); ++q) {
        if (c.rows[p] >= c.rows[q]) M(c.rows[p], c.rows[q]) += d * c.vals[p] * c.vals[q];
      }
    }
  }
  const bool fast = kernel == SchurKernel::structured;
  for (std::size_t k = 0; k < psd_.size(); ++k) {
    if (fast && psd_[k].structured) continue;
    generic_cone(psd_[k], w.X[k], w.Sinv[k], fast, M);
  }
  if (fast) {
    for (const auto& g : groups_) structured_group(g, w, M);
  }
  M.triangularView<Eigen::StrictlyUpper>().setZero();
}

}  // namespace crashcert
