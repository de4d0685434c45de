#include "coupon/iidn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>

#include "coupon/errors.hpp"
#include "coupon/matrix.hpp"
#include "coupon/rng.hpp"

namespace coupon::iidn {

using nn::Gradients;
using nn::Matrix;
using nn::ParamStore;

Variant variant_from_name(const std::string& name) {
  if (name == "iidn") return Variant::kIidn;
  if (name == "single-lstm") return Variant::kSingleLstm;
  if (name == "non-attention") return Variant::kNonAttention;
  if (name == "non-auxiliary") return Variant::kNonAuxiliary;
  throw ContractError("unknown network variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kIidn: return "iidn";
    case Variant::kSingleLstm: return "single-lstm";
    case Variant::kNonAttention: return "non-attention";
    case Variant::kNonAuxiliary: return "non-auxiliary";
  }
  throw ContractError("unknown network variant value");
}

AttentionKind attention_from_name(const std::string& name) {
  if (name == "linear") return AttentionKind::kLinear;
  if (name == "additive") return AttentionKind::kAdditive;
  throw ContractError("unknown attention kind: " + name);
}

std::string attention_name(AttentionKind k) {
  return k == AttentionKind::kLinear ? "linear" : "additive";
}

int IidnConfig::coupon_index(Money cents) const {
  for (std::size_t j = 0; j < coupon_amounts_cents.size(); ++j) {
    if (coupon_amounts_cents[j] == cents) return static_cast<int>(j);
  }
  throw ContractError("coupon amount " + format_money(cents) +
                      " is not in the configured menu");
}

void IidnConfig::validate() const {
  if (embed_dim <= 0 || hidden_dim <= 0 || enc1_dim <= 0 || enc2_dim <= 0 ||
      dec_dim <= 0 || action_vocab <= 0 || static_slots <= 0 ||
      static_buckets <= 0 || max_seq_len <= 0) {
    throw ContractError("network dimensions must be positive");
  }
  if (!std::is_sorted(dwell_edges.begin(), dwell_edges.end()) ||
      std::adjacent_find(dwell_edges.begin(), dwell_edges.end()) !=
          dwell_edges.end()) {
    throw ContractError("dwell edges must be strictly ascending");
  }
  if (coupon_amounts_cents.empty()) {
    throw ContractError("coupon menu must be non-empty");
  }
  for (std::size_t j = 0; j < coupon_amounts_cents.size(); ++j) {
    if (coupon_amounts_cents[j] < 0) {
      throw ContractError("coupon amounts must be non-negative");
    }
    if (j > 0 && coupon_amounts_cents[j] <= coupon_amounts_cents[j - 1]) {
      throw ContractError("coupon menu must be strictly ascending");
    }
  }
}

std::vector<double> dwell_quantile_edges(std::span<const LabeledSample> samples,
                                         int buckets) {
  if (buckets < 2) throw ContractError("dwell bucket count must be >= 2");
  std::vector<double> dwells;
  for (const auto& s : samples) {
    for (const auto& e : s.features.events) dwells.push_back(e.dwell_seconds);
  }
  if (dwells.empty()) throw ContractError("no dwell values to bucket");
  std::sort(dwells.begin(), dwells.end());
  std::vector<double> edges;
  for (int k = 1; k < buckets; ++k) {
    const std::size_t pos = dwells.size() * static_cast<std::size_t>(k) /
                            static_cast<std::size_t>(buckets);
    const double edge = dwells[std::min(pos, dwells.size() - 1)];
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

namespace {

struct Dims {
  int E, H, e1, e2, D, L, S;
  int input(int layer) const { return layer == 0 ? E : H; }
};

Dims dims_of(const IidnConfig& cfg) {
  return {cfg.embed_dim,  cfg.hidden_dim,   cfg.enc1_dim, cfg.enc2_dim,
          cfg.dec_dim,    cfg.num_layers(), cfg.static_slots};
}

int action_row(const IidnConfig& cfg, int action) {
  return (action >= 0 && action < cfg.action_vocab) ? action + 1 : 0;
}

int dwell_row(const IidnConfig& cfg, double dwell) {
  const auto it =
      std::upper_bound(cfg.dwell_edges.begin(), cfg.dwell_edges.end(), dwell);
  return static_cast<int>(it - cfg.dwell_edges.begin()) + 1;
}

// Each slot owns a block of static_buckets + 1 rows; the first is its OOV row.
int static_row(const IidnConfig& cfg, int slot, int code) {
  const int block = slot * (cfg.static_buckets + 1);
  return (code >= 0 && code < cfg.static_buckets) ? block + code + 1 : block;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

void axpy(double k, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += k * x[i];
}

// out = W x + b
void affine(const Matrix& w, std::span<const double> x, const Matrix& b,
            std::span<double> out) {
  nn::matvec(w, x, out);
  const auto bias = b.row(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i];
}

// grad(r, c) += a[r] * b[c]
void add_outer(Matrix& grad, std::span<const double> a,
               std::span<const double> b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r] == 0.0) continue;
    axpy(a[r], b, grad.row(r));
  }
}

void resize(Matrix& m, std::size_t rows, std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

double bce(double p, bool y) {
  return y ? -std::log(p) : -std::log1p(-p);
}

struct LayerCache {
  Matrix z;  // T x (H + input); [q_{t-1} ; x_t]
  Matrix g, i, ctil, o, c, tc, q;  // T x H each
};

struct SeqCache {
  int T = 0;
  std::vector<int> act_rows, dw_rows, stat_rows;
  std::vector<LayerCache> layers;
  std::vector<double> logits, weights;  // attention, length T
  Matrix att_m;                         // additive only: T x H tanh terms
  std::vector<double> f, hd;
};

struct HeadCache {
  int coupon_row = 0;
  std::vector<double> u, v1, v2, d1, d2;
  double ps = 0.0, pps = 0.0, pp = 0.0;
};

struct Params {
  const Matrix *ea, *ed, *es, *ec;
  struct Layer {
    const Matrix *wg, *wi, *wc, *wo, *bg, *bi, *bc, *bo;
  };
  std::vector<Layer> lstm;
  const Matrix *att_w = nullptr, *att_b = nullptr;  // linear attention
  const Matrix *att_W = nullptr, *att_bW = nullptr, *att_v = nullptr;
  const Matrix *ew1, *eb1, *ew2, *eb2;
  const Matrix *dwin, *db, *dwp, *dbp;
  const Matrix *dwh = nullptr, *dws = nullptr, *dbs = nullptr;  // auxiliary
  const Matrix *sw = nullptr, *sb = nullptr;  // direct stay head
};

Params bind(const IidnConfig& cfg, const ParamStore& ps) {
  Params p;
  p.ea = &ps.get("emb.action");
  p.ed = &ps.get("emb.dwell");
  p.es = &ps.get("emb.static");
  p.ec = &ps.get("emb.coupon");
  for (int l = 0; l < cfg.num_layers(); ++l) {
    const std::string k = "lstm" + std::to_string(l) + ".";
    p.lstm.push_back({&ps.get(k + "W_g"), &ps.get(k + "W_i"),
                      &ps.get(k + "W_c"), &ps.get(k + "W_o"),
                      &ps.get(k + "b_g"), &ps.get(k + "b_i"),
                      &ps.get(k + "b_c"), &ps.get(k + "b_o")});
  }
  if (cfg.has_attention()) {
    if (cfg.attention == AttentionKind::kLinear) {
      p.att_w = &ps.get("att.w");
      p.att_b = &ps.get("att.b");
    } else {
      p.att_W = &ps.get("att.W");
      p.att_bW = &ps.get("att.bW");
      p.att_v = &ps.get("att.v");
    }
  }
  p.ew1 = &ps.get("enc.W1");
  p.eb1 = &ps.get("enc.b1");
  p.ew2 = &ps.get("enc.W2");
  p.eb2 = &ps.get("enc.b2");
  p.dwin = &ps.get("dec.W_in");
  p.db = &ps.get("dec.b");
  p.dwp = &ps.get("dec.w_p");
  p.dbp = &ps.get("dec.b_p");
  if (cfg.auxiliary()) {
    p.dwh = &ps.get("dec.W_h");
    p.dws = &ps.get("dec.w_s");
    p.dbs = &ps.get("dec.b_s");
  } else {
    p.sw = &ps.get("stay.w");
    p.sb = &ps.get("stay.b");
  }
  return p;
}

void run_trunk(const IidnConfig& cfg, const Params& p,
               const FeatureTuple& feat, SeqCache& sc) {
  const Dims d = dims_of(cfg);
  if (feat.events.empty()) {
    throw ContractError("behavior sequence must be non-empty");
  }
  if (static_cast<int>(feat.static_codes.size()) != d.S) {
    throw ContractError("expected " + std::to_string(d.S) +
                        " static codes, got " +
                        std::to_string(feat.static_codes.size()));
  }
  const int T = static_cast<int>(
      std::min<std::size_t>(feat.events.size(), cfg.max_seq_len));
  const std::size_t skip = feat.events.size() - static_cast<std::size_t>(T);
  sc.T = T;

  sc.act_rows.resize(T);
  sc.dw_rows.resize(T);
  for (int t = 0; t < T; ++t) {
    const auto& ev = feat.events[skip + static_cast<std::size_t>(t)];
    sc.act_rows[t] = action_row(cfg, ev.action);
    sc.dw_rows[t] = dwell_row(cfg, ev.dwell_seconds);
  }
  sc.stat_rows.resize(d.S);
  sc.hd.assign(d.E, 0.0);
  for (int s = 0; s < d.S; ++s) {
    sc.stat_rows[s] = static_row(cfg, s, feat.static_codes[s]);
    axpy(1.0, p.es->row(sc.stat_rows[s]), sc.hd);
  }
  for (double& x : sc.hd) x /= d.S;

  sc.layers.resize(d.L);
  for (int l = 0; l < d.L; ++l) {
    auto& lc = sc.layers[l];
    const int in = d.input(l);
    resize(lc.z, T, d.H + in);
    for (Matrix* m : {&lc.g, &lc.i, &lc.ctil, &lc.o, &lc.c, &lc.tc, &lc.q}) {
      resize(*m, T, d.H);
    }
    const auto& lp = p.lstm[l];
    std::vector<double> a(d.H);
    for (int t = 0; t < T; ++t) {
      auto z = lc.z.row(t);
      if (t == 0) {
        std::fill(z.begin(), z.begin() + d.H, 0.0);
      } else {
        std::copy_n(lc.q.row(t - 1).begin(), d.H, z.begin());
      }
      auto x = z.subspan(d.H);
      if (l == 0) {
        const auto av = p.ea->row(sc.act_rows[t]);
        const auto dv = p.ed->row(sc.dw_rows[t]);
        for (int k = 0; k < d.E; ++k) x[k] = av[k] + dv[k];
      } else {
        std::copy_n(sc.layers[l - 1].q.row(t).begin(), d.H, x.begin());
      }
      affine(*lp.wg, z, *lp.bg, a);
      for (int k = 0; k < d.H; ++k) lc.g.at(t, k) = nn::sigmoid(a[k]);
      affine(*lp.wi, z, *lp.bi, a);
      for (int k = 0; k < d.H; ++k) lc.i.at(t, k) = nn::sigmoid(a[k]);
      affine(*lp.wc, z, *lp.bc, a);
      for (int k = 0; k < d.H; ++k) lc.ctil.at(t, k) = std::tanh(a[k]);
      affine(*lp.wo, z, *lp.bo, a);
      for (int k = 0; k < d.H; ++k) lc.o.at(t, k) = nn::sigmoid(a[k]);
      for (int k = 0; k < d.H; ++k) {
        const double prev = t == 0 ? 0.0 : lc.c.at(t - 1, k);
        const double ct = lc.g.at(t, k) * prev + lc.i.at(t, k) * lc.ctil.at(t, k);
        lc.c.at(t, k) = ct;
        lc.tc.at(t, k) = std::tanh(ct);
        lc.q.at(t, k) = lc.o.at(t, k) * lc.tc.at(t, k);
      }
    }
  }

  const auto& top = sc.layers[d.L - 1].q;
  sc.f.assign(d.H, 0.0);
  if (!cfg.has_attention()) {
    sc.logits.clear();
    sc.weights.clear();
    std::copy_n(top.row(T - 1).begin(), d.H, sc.f.begin());
    return;
  }
  sc.logits.resize(T);
  if (cfg.attention == AttentionKind::kLinear) {
    for (int t = 0; t < T; ++t) {
      sc.logits[t] = dot(p.att_w->row(0), top.row(t)) + p.att_b->at(0, 0);
    }
  } else {
    resize(sc.att_m, T, d.H);
    std::vector<double> a(d.H);
    for (int t = 0; t < T; ++t) {
      affine(*p.att_W, top.row(t), *p.att_bW, a);
      for (int k = 0; k < d.H; ++k) sc.att_m.at(t, k) = std::tanh(a[k]);
      sc.logits[t] = dot(p.att_v->row(0), sc.att_m.row(t));
    }
  }
  sc.weights = nn::softmax(sc.logits);
  for (int t = 0; t < T; ++t) axpy(sc.weights[t], top.row(t), sc.f);
}

void run_head(const IidnConfig& cfg, const Params& p, const SeqCache& sc,
              int coupon_row, HeadCache& hc) {
  const Dims d = dims_of(cfg);
  hc.coupon_row = coupon_row;
  hc.u.resize(d.H + 2 * d.E);
  std::copy(sc.f.begin(), sc.f.end(), hc.u.begin());
  std::copy(sc.hd.begin(), sc.hd.end(), hc.u.begin() + d.H);
  const auto cd = p.ec->row(coupon_row);
  std::copy(cd.begin(), cd.end(), hc.u.begin() + d.H + d.E);

  hc.v1.resize(d.e1);
  affine(*p.ew1, hc.u, *p.eb1, hc.v1);
  for (double& x : hc.v1) x = nn::relu(x);
  hc.v2.resize(d.e2);
  affine(*p.ew2, hc.v1, *p.eb2, hc.v2);
  for (double& x : hc.v2) x = nn::relu(x);

  hc.d1.resize(d.D);
  affine(*p.dwin, hc.v2, *p.db, hc.d1);
  for (double& x : hc.d1) x = std::tanh(x);

  if (cfg.auxiliary()) {
    hc.ps = nn::sigmoid(dot(p.dws->row(0), hc.d1) + p.dbs->at(0, 0));
    hc.d2.resize(d.D);
    affine(*p.dwin, hc.v2, *p.db, hc.d2);
    for (int k = 0; k < d.D; ++k) {
      hc.d2[k] = std::tanh(hc.d2[k] + dot(p.dwh->row(k), hc.d1));
    }
    hc.pps = nn::sigmoid(dot(p.dwp->row(0), hc.d2) + p.dbp->at(0, 0));
    hc.pp = hc.ps * hc.pps;
  } else {
    hc.pp = nn::sigmoid(dot(p.dwp->row(0), hc.d1) + p.dbp->at(0, 0));
    hc.ps = nn::sigmoid(dot(p.sw->row(0), hc.v2) + p.sb->at(0, 0));
    hc.pps = 0.0;  // not modeled
  }
}

struct HeadGrads {
  std::vector<double> df, dhd;  // trunk outputs
};

// dzs / dzp are the loss derivatives at the stay and pay logits (already
// carrying the 1/batch factor).
void backward_head(const IidnConfig& cfg, const Params& p, const SeqCache& sc,
                   const HeadCache& hc, double dzs, double dzp, Gradients& g,
                   HeadGrads& out) {
  const Dims d = dims_of(cfg);
  std::vector<double> dv2(d.e2, 0.0);
  std::vector<double> dd1(d.D, 0.0);

  if (cfg.auxiliary()) {
    auto& gws = g.accum("dec.w_s", 1, d.D);
    axpy(dzs, hc.d1, gws.row(0));
    g.accum("dec.b_s", 1, 1).at(0, 0) += dzs;
    axpy(dzs, p.dws->row(0), dd1);

    auto& gwp = g.accum("dec.w_p", 1, d.D);
    axpy(dzp, hc.d2, gwp.row(0));
    g.accum("dec.b_p", 1, 1).at(0, 0) += dzp;

    std::vector<double> da2(d.D);
    for (int k = 0; k < d.D; ++k) {
      da2[k] = dzp * p.dwp->at(0, k) * (1.0 - hc.d2[k] * hc.d2[k]);
    }
    add_outer(g.accum("dec.W_in", d.D, d.e2), da2, hc.v2);
    add_outer(g.accum("dec.W_h", d.D, d.D), da2, hc.d1);
    axpy(1.0, da2, g.accum("dec.b", 1, d.D).row(0));
    nn::matvec_transposed_add(*p.dwin, da2, dv2);
    nn::matvec_transposed_add(*p.dwh, da2, dd1);
  } else {
    auto& gsw = g.accum("stay.w", 1, d.e2);
    axpy(dzs, hc.v2, gsw.row(0));
    g.accum("stay.b", 1, 1).at(0, 0) += dzs;
    axpy(dzs, p.sw->row(0), dv2);

    auto& gwp = g.accum("dec.w_p", 1, d.D);
    axpy(dzp, hc.d1, gwp.row(0));
    g.accum("dec.b_p", 1, 1).at(0, 0) += dzp;
    axpy(dzp, p.dwp->row(0), dd1);
  }

  std::vector<double> da1(d.D);
  for (int k = 0; k < d.D; ++k) {
    da1[k] = dd1[k] * (1.0 - hc.d1[k] * hc.d1[k]);
  }
  add_outer(g.accum("dec.W_in", d.D, d.e2), da1, hc.v2);
  axpy(1.0, da1, g.accum("dec.b", 1, d.D).row(0));
  nn::matvec_transposed_add(*p.dwin, da1, dv2);

  std::vector<double> db2(d.e2);
  for (int k = 0; k < d.e2; ++k) db2[k] = hc.v2[k] > 0.0 ? dv2[k] : 0.0;
  add_outer(g.accum("enc.W2", d.e2, d.e1), db2, hc.v1);
  axpy(1.0, db2, g.accum("enc.b2", 1, d.e2).row(0));
  std::vector<double> dv1(d.e1, 0.0);
  nn::matvec_transposed_add(*p.ew2, db2, dv1);
  std::vector<double> db1(d.e1);
  for (int k = 0; k < d.e1; ++k) db1[k] = hc.v1[k] > 0.0 ? dv1[k] : 0.0;
  add_outer(g.accum("enc.W1", d.e1, d.H + 2 * d.E), db1, hc.u);
  axpy(1.0, db1, g.accum("enc.b1", 1, d.e1).row(0));
  std::vector<double> du(d.H + 2 * d.E, 0.0);
  nn::matvec_transposed_add(*p.ew1, db1, du);

  out.df.assign(du.begin(), du.begin() + d.H);
  out.dhd.assign(du.begin() + d.H, du.begin() + d.H + d.E);
  auto& gec = g.accum("emb.coupon", p.ec->rows(), p.ec->cols());
  axpy(1.0, std::span<const double>(du).subspan(d.H + d.E), gec.row(hc.coupon_row));

  const double inv_s = 1.0 / d.S;
  auto& ges = g.accum("emb.static", p.es->rows(), p.es->cols());
  for (int s = 0; s < d.S; ++s) {
    axpy(inv_s, out.dhd, ges.row(sc.stat_rows[s]));
  }
}

void backward_trunk(const IidnConfig& cfg, const Params& p, const SeqCache& sc,
                    std::span<const double> df, Gradients& g) {
  const Dims d = dims_of(cfg);
  const int T = sc.T;
  std::vector<Matrix> dq(d.L);
  for (auto& m : dq) m = Matrix(T, d.H);

  const auto& top = sc.layers[d.L - 1].q;
  if (!cfg.has_attention()) {
    axpy(1.0, df, dq[d.L - 1].row(T - 1));
  } else {
    std::vector<double> dlogit(T);
    double mixed = 0.0;
    for (int t = 0; t < T; ++t) {
      dlogit[t] = dot(df, top.row(t));
      axpy(sc.weights[t], df, dq[d.L - 1].row(t));
      mixed += sc.weights[t] * dlogit[t];
    }
    for (int t = 0; t < T; ++t) {
      dlogit[t] = sc.weights[t] * (dlogit[t] - mixed);
    }
    if (cfg.attention == AttentionKind::kLinear) {
      auto& gw = g.accum("att.w", 1, d.H);
      double dbias = 0.0;
      for (int t = 0; t < T; ++t) {
        axpy(dlogit[t], top.row(t), gw.row(0));
        dbias += dlogit[t];
        axpy(dlogit[t], p.att_w->row(0), dq[d.L - 1].row(t));
      }
      g.accum("att.b", 1, 1).at(0, 0) += dbias;
    } else {
      auto& gv = g.accum("att.v", 1, d.H);
      auto& gW = g.accum("att.W", d.H, d.H);
      auto& gbW = g.accum("att.bW", 1, d.H);
      std::vector<double> dm(d.H);
      for (int t = 0; t < T; ++t) {
        axpy(dlogit[t], sc.att_m.row(t), gv.row(0));
        for (int k = 0; k < d.H; ++k) {
          const double m = sc.att_m.at(t, k);
          dm[k] = dlogit[t] * p.att_v->at(0, k) * (1.0 - m * m);
        }
        add_outer(gW, dm, top.row(t));
        axpy(1.0, dm, gbW.row(0));
        nn::matvec_transposed_add(*p.att_W, dm, dq[d.L - 1].row(t));
      }
    }
  }

  std::vector<double> dc(d.H), dg(d.H), di(d.H), dct(d.H), dout(d.H), dz;
  for (int l = d.L - 1; l >= 0; --l) {
    const auto& lc = sc.layers[l];
    const auto& lp = p.lstm[l];
    const int in = d.input(l);
    const std::string key = "lstm" + std::to_string(l) + ".";
    auto& gwg = g.accum(key + "W_g", d.H, d.H + in);
    auto& gwi = g.accum(key + "W_i", d.H, d.H + in);
    auto& gwc = g.accum(key + "W_c", d.H, d.H + in);
    auto& gwo = g.accum(key + "W_o", d.H, d.H + in);
    auto& gbg = g.accum(key + "b_g", 1, d.H);
    auto& gbi = g.accum(key + "b_i", 1, d.H);
    auto& gbc = g.accum(key + "b_c", 1, d.H);
    auto& gbo = g.accum(key + "b_o", 1, d.H);
    std::fill(dc.begin(), dc.end(), 0.0);
    dz.assign(d.H + in, 0.0);
    for (int t = T - 1; t >= 0; --t) {
      const auto dqt = dq[l].row(t);
      for (int k = 0; k < d.H; ++k) {
        const double o = lc.o.at(t, k);
        const double tc = lc.tc.at(t, k);
        dout[k] = dqt[k] * tc * o * (1.0 - o);
        dc[k] += dqt[k] * o * (1.0 - tc * tc);
        const double prev = t == 0 ? 0.0 : lc.c.at(t - 1, k);
        const double gk = lc.g.at(t, k);
        const double ik = lc.i.at(t, k);
        const double ck = lc.ctil.at(t, k);
        dg[k] = dc[k] * prev * gk * (1.0 - gk);
        di[k] = dc[k] * ck * ik * (1.0 - ik);
        dct[k] = dc[k] * ik * (1.0 - ck * ck);
        dc[k] *= gk;  // becomes dc_{t-1}
      }
      const auto z = lc.z.row(t);
      add_outer(gwg, dg, z);
      add_outer(gwi, di, z);
      add_outer(gwc, dct, z);
      add_outer(gwo, dout, z);
      axpy(1.0, dg, gbg.row(0));
      axpy(1.0, di, gbi.row(0));
      axpy(1.0, dct, gbc.row(0));
      axpy(1.0, dout, gbo.row(0));
      std::fill(dz.begin(), dz.end(), 0.0);
      nn::matvec_transposed_add(*lp.wg, dg, dz);
      nn::matvec_transposed_add(*lp.wi, di, dz);
      nn::matvec_transposed_add(*lp.wc, dct, dz);
      nn::matvec_transposed_add(*lp.wo, dout, dz);
      const std::span<const double> dzv(dz);
      if (t > 0) axpy(1.0, dzv.first(d.H), dq[l].row(t - 1));
      const auto dx = dzv.subspan(d.H);
      if (l > 0) {
        axpy(1.0, dx, dq[l - 1].row(t));
      } else {
        auto& gea = g.accum("emb.action", p.ea->rows(), p.ea->cols());
        auto& ged = g.accum("emb.dwell", p.ed->rows(), p.ed->cols());
        axpy(1.0, dx, gea.row(sc.act_rows[t]));
        axpy(1.0, dx, ged.row(sc.dw_rows[t]));
      }
    }
  }
}

}  // namespace

nn::ParamStore make_params(const IidnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Dims d = dims_of(cfg);
  ParamStore ps;
  Rng rng(seed);
  auto add = [&](const std::string& name, std::size_t rows, std::size_t cols,
                 std::size_t fan_in) {
    Matrix m(rows, cols);
    ParamStore::init_uniform(m, fan_in, rng);
    ps.add(name, std::move(m));
  };
  const std::size_t E = d.E, H = d.H;
  add("emb.action", cfg.action_vocab + 1, E, E);
  add("emb.dwell", cfg.dwell_buckets() + 1, E, E);
  add("emb.static", static_cast<std::size_t>(d.S) * (cfg.static_buckets + 1), E,
      E);
  add("emb.coupon", cfg.coupon_amounts_cents.size(), E, E);
  for (int l = 0; l < d.L; ++l) {
    const std::string k = "lstm" + std::to_string(l) + ".";
    const std::size_t in = H + static_cast<std::size_t>(d.input(l));
    for (const char* gate : {"W_g", "W_i", "W_c", "W_o"}) add(k + gate, H, in, in);
    for (const char* gate : {"b_g", "b_i", "b_c", "b_o"}) add(k + gate, 1, H, in);
  }
  if (cfg.has_attention()) {
    if (cfg.attention == AttentionKind::kLinear) {
      add("att.w", 1, H, H);
      add("att.b", 1, 1, H);
    } else {
      add("att.W", H, H, H);
      add("att.bW", 1, H, H);
      add("att.v", 1, H, H);
    }
  }
  const std::size_t enc_in = H + 2 * E;
  add("enc.W1", d.e1, enc_in, enc_in);
  add("enc.b1", 1, d.e1, enc_in);
  add("enc.W2", d.e2, d.e1, d.e1);
  add("enc.b2", 1, d.e2, d.e1);
  add("dec.W_in", d.D, d.e2, d.e2);
  if (cfg.auxiliary()) add("dec.W_h", d.D, d.D, d.D);
  add("dec.b", 1, d.D, d.e2);
  if (cfg.auxiliary()) {
    add("dec.w_s", 1, d.D, d.D);
    add("dec.b_s", 1, 1, d.D);
  } else {
    add("stay.w", 1, d.e2, d.e2);
    add("stay.b", 1, 1, d.e2);
  }
  add("dec.w_p", 1, d.D, d.D);
  add("dec.b_p", 1, 1, d.D);
  return ps;
}

BatchLoss forward_backward(const IidnConfig& cfg, nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           std::span<const std::size_t> index,
                           nn::Gradients* grads) {
  if (index.empty()) throw ContractError("empty batch");
  const Params p = bind(cfg, params);
  if (grads) {
    // Make sure untouched tensors still get (zero) entries so the
    // optimizer sees a gradient for every parameter.
    for (const auto& name : params.names()) {
      const Matrix& m = params.get(name);
      grads->accum(name, m.rows(), m.cols());
    }
  }
  const double scale = 1.0 / static_cast<double>(index.size());
  BatchLoss loss;
  SeqCache sc;
  HeadCache hc;
  HeadGrads hg;
  for (const std::size_t idx : index) {
    if (idx >= samples.size()) throw ContractError("batch index out of range");
    const LabeledSample& s = samples[idx];
    run_trunk(cfg, p, s.features, sc);
    run_head(cfg, p, sc, cfg.coupon_index(s.features.coupon_cents), hc);
    loss.stay += bce(hc.ps, s.stayed);
    loss.pay += bce(hc.pp, s.paid);
    if (!grads) continue;
    const double ys = s.stayed ? 1.0 : 0.0;
    const double yp = s.paid ? 1.0 : 0.0;
    double dzs, dzp;
    if (cfg.auxiliary()) {
      const double rest = 1.0 - hc.pp;
      if (!(rest > 0.0)) {
        throw TrainingError("pay probability saturated at 1");
      }
      dzs = scale * ((hc.ps - ys) + (hc.pp - yp) * (1.0 - hc.ps) / rest);
      dzp = scale * (hc.pp - yp) * (1.0 - hc.pps) / rest;
    } else {
      dzs = scale * (hc.ps - ys);
      dzp = scale * (hc.pp - yp);
    }
    backward_head(cfg, p, sc, hc, dzs, dzp, *grads, hg);
    backward_trunk(cfg, p, sc, hg.df, *grads);
  }
  loss.stay *= scale;
  loss.pay *= scale;
  return loss;
}

BatchLoss forward_backward(const IidnConfig& cfg, nn::ParamStore& params,
                           std::span<const LabeledSample> samples,
                           nn::Gradients* grads) {
  std::vector<std::size_t> index(samples.size());
  std::iota(index.begin(), index.end(), 0);
  return forward_backward(cfg, params, samples, index, grads);
}

IidnModel IidnModel::init(IidnConfig cfg, std::uint64_t seed) {
  return IidnModel(cfg, make_params(cfg, seed));
}

IidnModel::IidnModel(IidnConfig cfg, nn::ParamStore params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

namespace {

IntentScores to_scores(const IidnConfig& cfg, const HeadCache& hc) {
  return cfg.auxiliary() ? IntentScores::from_factors(hc.ps, hc.pps)
                         : IntentScores::from_marginals(hc.ps, hc.pp);
}

}  // namespace

IntentScores IidnModel::score(const FeatureTuple& features) const {
  const Params p = bind(cfg_, params_);
  SeqCache sc;
  HeadCache hc;
  run_trunk(cfg_, p, features, sc);
  run_head(cfg_, p, sc, cfg_.coupon_index(features.coupon_cents), hc);
  return to_scores(cfg_, hc);
}

ScoreDetail IidnModel::score_detail(const FeatureTuple& features) const {
  const Params p = bind(cfg_, params_);
  SeqCache sc;
  HeadCache hc;
  run_trunk(cfg_, p, features, sc);
  run_head(cfg_, p, sc, cfg_.coupon_index(features.coupon_cents), hc);
  return {to_scores(cfg_, hc), sc.weights};
}

std::vector<IntentScores> IidnModel::score_menu(
    const FeatureTuple& features) const {
  const Params p = bind(cfg_, params_);
  SeqCache sc;
  HeadCache hc;
  run_trunk(cfg_, p, features, sc);
  std::vector<IntentScores> out;
  out.reserve(cfg_.coupon_amounts_cents.size());
  for (std::size_t j = 0; j < cfg_.coupon_amounts_cents.size(); ++j) {
    run_head(cfg_, p, sc, static_cast<int>(j), hc);
    out.push_back(to_scores(cfg_, hc));
  }
  return out;
}

}  // namespace coupon::iidn
