#include "spikelab/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "spikelab/kernels.hpp"

namespace spikelab {
namespace {

// Scratch slot layout (see detail::scratch): each evaluation family owns a
// disjoint range so sequential calls never trample a caller's live buffer.
// Within one call, chains alternate between the two buffers of their pair.
constexpr int kSlotEnergyA = 1, kSlotEnergyB = 2;
constexpr int kSlotGradLA = 3, kSlotGradLB = 4, kSlotGradTA = 5, kSlotGradTB = 6;
constexpr int kSlotHvpPA = 7, kSlotHvpPB = 8, kSlotHvpQA = 9, kSlotHvpQB = 10;
constexpr int kSlotHvpTrailBase = 11;  // + 2*order, order <= 32
constexpr int kSlotThird = 80, kSlotRHvpA = 81, kSlotRHvpB = 82, kSlotRHvpC = 83;

std::uint64_t ipow_checked(std::uint64_t base, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) {
    if (r > (std::uint64_t{1} << 62) / base) fail("tensor size overflows 64-bit entry count");
    r *= base;
  }
  return r;
}

std::size_t ipow(int N, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(N);
  return r;
}

double term_coeff(const MixtureTerm& t, int N) {
  return t.a * std::pow(static_cast<double>(N), -0.5 * (t.p - 1));
}

// Trailing-contraction chain: starting from an order-q view T (N^q entries),
// contracts the last slot with x repeatedly until a length-N vector remains.
// Uses the (bufA, bufB) scratch pair; T itself is never written.
const double* chain_trail_to_vec(const double* T, int q, int N, const double* x, int slotA,
                                 int slotB) {
  if (q == 1) return T;
  const KernelOps& k = kernels();
  int cur_slot = slotA;
  while (q > 1) {
    const std::size_t rows = ipow(N, q - 1);
    double* out = detail::scratch(rows, cur_slot);
    k.rows_dot(T, rows, static_cast<std::size_t>(N), x, out);
    T = out;
    cur_slot = (cur_slot == slotA) ? slotB : slotA;
    --q;
  }
  return T;
}

// Energy of one raw tensor: full trailing chain to a scalar.
double term_energy_raw(const Tensor& t, const double* x) {
  const double* vec = chain_trail_to_vec(t.w.data(), t.p, t.N, x, kSlotEnergyA, kSlotEnergyB);
  return kernels().dot(vec, x, static_cast<std::size_t>(t.N));
}

// out += coeff * grad <W, x^{tensor p}>.  One fused pass over the tensor
// produces both the leading contraction L1 (free indices 2..p) and the
// trailing contraction R1 (free indices 1..p-1); lower-order chains finish
// each free slot.
void term_gradient_raw(const Tensor& t, const double* x, double coeff, double* out) {
  const KernelOps& k = kernels();
  const int p = t.p, N = t.N;
  const auto n = static_cast<std::size_t>(N);
  if (p == 1) {
    k.axpy(out, coeff, t.w.data(), n);
    return;
  }
  const std::size_t slab = ipow(N, p - 1);
  const std::size_t rows_per_slab = slab / n;
  double* L = detail::scratch(slab, kSlotGradLA);
  double* R = detail::scratch(slab, kSlotGradTA);
  std::memset(L, 0, slab * sizeof(double));
  for (int i = 0; i < N; ++i) {
    const double* block = t.w.data() + static_cast<std::size_t>(i) * slab;
    k.axpy(L, x[i], block, slab);
    k.rows_dot(block, rows_per_slab, n, x, R + static_cast<std::size_t>(i) * rows_per_slab);
  }
  // Free slot 1: R holds order p-1; finish with x on its trailing slots.
  // (First chain write must target the B buffer: R lives in the A buffer.)
  k.axpy(out, coeff, chain_trail_to_vec(R, p - 1, N, x, kSlotGradTB, kSlotGradTA), n);
  // Free slots s = 2..p: L holds lead^{s-1}(W) of order p-s+1.
  int l_slot = kSlotGradLA;
  for (int s = 2; s <= p; ++s) {
    const int q = p - s + 1;
    k.axpy(out, coeff, chain_trail_to_vec(L, q, N, x, kSlotGradTA, kSlotGradTB), n);
    if (s < p) {
      const std::size_t sub = ipow(N, q - 1);
      const int next_slot = (l_slot == kSlotGradLA) ? kSlotGradLB : kSlotGradLA;
      double* Lnext = detail::scratch(sub, next_slot);
      std::memset(Lnext, 0, sub * sizeof(double));
      k.slabs_axpy(L, n, sub, x, Lnext);
      L = Lnext;
      l_slot = next_slot;
    }
  }
}

// Sum over placements of v in the trailing q-1 slots of an order-q view T
// (all other trailing slots take x, leading slot free); accumulates
// coeff * result into out.  Two passes over T per recursion level.
void one_v_trailing_accum(const double* T, int q, int N, const double* x, const double* v,
                          double coeff, double* out) {
  if (q <= 1) return;
  const KernelOps& k = kernels();
  const auto n = static_cast<std::size_t>(N);
  const std::size_t rows = ipow(N, q - 1);
  const int slotA = kSlotHvpTrailBase + 2 * q, slotB = slotA + 1;
  // v in the last slot, x in the remaining trailing slots.  The finishing
  // chain starts in the B buffer since tv occupies A.
  double* tv = detail::scratch(rows, slotA);
  k.rows_dot(T, rows, n, v, tv);
  k.axpy(out, coeff, chain_trail_to_vec(tv, q - 1, N, x, slotB, slotA), n);
  if (q == 2) return;
  // x in the last slot, v somewhere in the rest: recurse one order down.
  double* tx = detail::scratch(rows, slotB);
  k.rows_dot(T, rows, n, x, tx);
  one_v_trailing_accum(tx, q - 1, N, x, v, coeff, out);
}

// out += coeff * d2<W, x^{tensor p}> v.  Maintains the all-x leading chain P
// and the exactly-one-v leading chain Q; for each free slot s the
// contribution splits into "v among the s-1 leading contracted slots"
// (trail-chain Q_{s-1}) and "v among the p-s trailing slots"
// (one_v_trailing on P_{s-1}).
void term_hvp_raw(const Tensor& t, const double* x, const double* v, double coeff, double* out) {
  const KernelOps& k = kernels();
  const int p = t.p, N = t.N;
  const auto n = static_cast<std::size_t>(N);
  if (p == 1) return;
  // s = 1: v is in some trailing slot of W itself.
  one_v_trailing_accum(t.w.data(), p, N, x, v, coeff, out);
  // Build P1 = lead_x(W), Q1 = lead_v(W).
  const std::size_t slab = ipow(N, p - 1);
  double* P = detail::scratch(slab, kSlotHvpPA);
  double* Q = detail::scratch(slab, kSlotHvpQA);
  std::memset(P, 0, slab * sizeof(double));
  std::memset(Q, 0, slab * sizeof(double));
  k.slabs_axpy(t.w.data(), n, slab, x, P);
  k.slabs_axpy(t.w.data(), n, slab, v, Q);
  int p_slot = kSlotHvpPA, q_slot = kSlotHvpQA;
  for (int s = 2; s <= p; ++s) {
    const int q = p - s + 1;  // order of P_{s-1}, Q_{s-1}
    k.axpy(out, coeff, chain_trail_to_vec(Q, q, N, x, kSlotGradTA, kSlotGradTB), n);
    one_v_trailing_accum(P, q, N, x, v, coeff, out);
    if (s < p) {
      const std::size_t sub = ipow(N, q - 1);
      const int np = (p_slot == kSlotHvpPA) ? kSlotHvpPB : kSlotHvpPA;
      const int nq = (q_slot == kSlotHvpQA) ? kSlotHvpQB : kSlotHvpQA;
      double* Pn = detail::scratch(sub, np);
      double* Qn = detail::scratch(sub, nq);
      std::memset(Pn, 0, sub * sizeof(double));
      std::memset(Qn, 0, sub * sizeof(double));
      k.slabs_axpy(Q, n, sub, x, Qn);  // Q_s = lead_x(Q_{s-1}) + lead_v(P_{s-1})
      k.slabs_axpy(P, n, sub, v, Qn);
      k.slabs_axpy(P, n, sub, x, Pn);  // P_s = lead_x(P_{s-1})
      P = Pn;
      Q = Qn;
      p_slot = np;
      q_slot = nq;
    }
  }
}

struct RefCtx {
  const Tensor* t;
  const std::vector<Slot>* slots;
  const double* x;
  const double* v;
  int free_idx = 0;
  int diag_idx = 0;
};

double ref_rec(const RefCtx& c, int slot, std::size_t offset) {
  const int p = c.t->p, N = c.t->N;
  if (slot == p) return c.t->w[offset];
  const std::size_t base = offset * static_cast<std::size_t>(N);
  switch ((*c.slots)[slot]) {
    case Slot::kFree:
      return ref_rec(c, slot + 1, base + static_cast<std::size_t>(c.free_idx));
    case Slot::kDiag:
      return ref_rec(c, slot + 1, base + static_cast<std::size_t>(c.diag_idx));
    case Slot::kX: {
      double s = 0;
      for (int i = 0; i < N; ++i) s += c.x[i] * ref_rec(c, slot + 1, base + i);
      return s;
    }
    case Slot::kV: {
      double s = 0;
      for (int i = 0; i < N; ++i) s += c.v[i] * ref_rec(c, slot + 1, base + i);
      return s;
    }
  }
  fail("reference_contraction: bad slot");
}

void validate_ref_slots(const Tensor& t, const std::vector<Slot>& slots, int expect_free) {
  if (static_cast<int>(slots.size()) != t.p)
    fail("reference_contraction: slot list length != tensor order");
  int nfree = 0, ndiag = 0;
  for (Slot s : slots) {
    if (s == Slot::kFree) ++nfree;
    if (s == Slot::kDiag) ++ndiag;
  }
  if (nfree != expect_free) fail("reference_contraction: wrong number of free slots");
  if (ndiag == 1) fail("reference_contraction: a lone diag slot is meaningless");
}

double ref_eval_with_diag(RefCtx& c) {
  bool has_diag = false;
  for (Slot s : *c.slots)
    if (s == Slot::kDiag) has_diag = true;
  if (!has_diag) return ref_rec(c, 0, 0);
  double sum = 0;
  for (int j = 0; j < c.t->N; ++j) {
    c.diag_idx = j;
    sum += ref_rec(c, 0, 0);
  }
  return sum;
}

// tr d2<W, x^p> = 2 * sum over unordered slot pairs of the diag contraction.
double term_hessian_trace_raw(const Tensor& t, const double* x) {
  if (t.p < 2) return 0;
  std::vector<Slot> slots(t.p, Slot::kX);
  double sum = 0;
  for (int s = 0; s < t.p; ++s)
    for (int r = s + 1; r < t.p; ++r) {
      slots[s] = slots[r] = Slot::kDiag;
      RefCtx c{&t, &slots, x, nullptr};
      sum += 2.0 * ref_eval_with_diag(c);
      slots[s] = slots[r] = Slot::kX;
    }
  return sum;
}

// out += coeff * v3, v3_i = sum_j d^3<W, x^p>[e_i, e_j, e_j].
void term_third_diag_raw(const Tensor& t, const double* x, double coeff, double* out) {
  if (t.p < 3) return;
  const int N = t.N;
  std::vector<Slot> slots(t.p, Slot::kX);
  for (int s = 0; s < t.p; ++s)
    for (int r = 0; r < t.p; ++r)
      for (int u = r + 1; u < t.p; ++u) {
        if (r == s || u == s) continue;
        slots[s] = Slot::kFree;
        slots[r] = slots[u] = Slot::kDiag;
        RefCtx c{&t, &slots, x, nullptr};
        for (int i = 0; i < N; ++i) {
          c.free_idx = i;
          out[i] += 2.0 * coeff * ref_eval_with_diag(c);
        }
        slots[s] = slots[r] = slots[u] = Slot::kX;
      }
}

void check_model_state(const Model& mdl) {
  if (mdl.N < 2) fail("model: N must be >= 2");
  if (mdl.disorder.tensors.size() != mdl.mixture.terms.size())
    fail("model: disorder does not match mixture");
}

}  // namespace

MixtureSpec make_mixture(std::vector<MixtureTerm> terms) {
  std::sort(terms.begin(), terms.end(),
            [](const MixtureTerm& a, const MixtureTerm& b) { return a.p < b.p; });
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].p < 1) fail("mixture: tensor order p must be >= 1");
    if (!(terms[i].a > 0)) fail("mixture: amplitude a_p must be > 0");
    if (i > 0 && terms[i].p == terms[i - 1].p) fail("mixture: duplicate tensor order");
  }
  return MixtureSpec{std::move(terms)};
}

std::uint64_t mixture_fingerprint(const MixtureSpec& mix, int N) {
  std::uint64_t h = mix_seed(0x73706b6c61623031ULL, static_cast<std::uint64_t>(N));
  for (const auto& tm : mix.terms) {
    h = mix_seed(h, static_cast<std::uint64_t>(tm.p));
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof tm.a);
    std::memcpy(&bits, &tm.a, sizeof bits);
    h = mix_seed(h, bits);
  }
  return h ? h : 1;
}

double xi_value(const MixtureSpec& mix, double t) {
  double s = 0;
  for (const auto& tm : mix.terms) s += tm.a * tm.a * std::pow(t, tm.p);
  return s;
}

double xi_d1(const MixtureSpec& mix, double t) {
  double s = 0;
  for (const auto& tm : mix.terms) s += tm.a * tm.a * tm.p * std::pow(t, tm.p - 1);
  return s;
}

double xi_d2(const MixtureSpec& mix, double t) {
  double s = 0;
  for (const auto& tm : mix.terms)
    if (tm.p >= 2) s += tm.a * tm.a * tm.p * (tm.p - 1) * std::pow(t, tm.p - 2);
  return s;
}

double covariance_oracle(const MixtureSpec& mix, int N, double t) {
  return N * xi_value(mix, t);
}

std::uint64_t mixture_entry_count(const MixtureSpec& mix, int N) {
  std::uint64_t total = 0;
  for (const auto& tm : mix.terms) {
    const std::uint64_t c = ipow_checked(static_cast<std::uint64_t>(N), tm.p);
    if (total > (std::uint64_t{1} << 62) - c) fail("mixture entry count overflows");
    total += c;
  }
  return total;
}

Tensor sample_tensor(int p, int N, std::uint64_t seed) {
  if (p < 1) fail("sample_tensor: p must be >= 1");
  if (N < 2) fail("sample_tensor: N must be >= 2");
  Tensor t;
  t.p = p;
  t.N = N;
  t.w.resize(ipow(N, p));
  Rng rng(derive_seed(seed, {0x7e5d0eULL, static_cast<std::uint64_t>(p)}));
  rng.fill_gaussian(t.w.data(), t.w.size());
  return t;
}

Disorder sample_disorder(const MixtureSpec& mix, int N, std::uint64_t seed,
                         std::uint64_t entry_budget) {
  std::uint64_t total = 0;
  for (const auto& tm : mix.terms) {
    total += ipow_checked(static_cast<std::uint64_t>(N), tm.p);
    if (total > entry_budget)
      fail("disorder: order p = " + std::to_string(tm.p) + " pushes the entry count to " +
           std::to_string(total) + ", over the budget of " + std::to_string(entry_budget) +
           " (raise it explicitly to proceed)");
  }
  Disorder d;
  d.N = N;
  d.seed = seed;
  d.fingerprint = mixture_fingerprint(mix, N);
  for (const auto& tm : mix.terms) d.tensors.push_back(sample_tensor(tm.p, N, seed));
  return d;
}

Model make_model(MixtureSpec mix, SignalSpec sig, int N, std::uint64_t seed,
                 std::uint64_t entry_budget) {
  Disorder d = sample_disorder(mix, N, seed, entry_budget);
  return make_model_with_disorder(std::move(mix), sig, std::move(d));
}

Model make_model_with_disorder(MixtureSpec mix, SignalSpec sig, Disorder dis) {
  if (sig.k < 1) fail("signal: k must be >= 1");
  if (sig.lambda < 0) fail("signal: lambda must be >= 0");
  if (dis.tensors.size() != mix.terms.size()) fail("model: disorder does not match mixture");
  if (dis.fingerprint != 0 && dis.fingerprint != mixture_fingerprint(mix, dis.N))
    fail("model: disorder fingerprint mismatch (sampled for a different mixture or N)");
  for (std::size_t i = 0; i < mix.terms.size(); ++i) {
    if (dis.tensors[i].p != mix.terms[i].p || dis.tensors[i].N != dis.N ||
        dis.tensors[i].w.size() != ipow(dis.N, dis.tensors[i].p))
      fail("model: tensor shape does not match mixture term");
  }
  Model m;
  m.N = dis.N;
  m.mixture = std::move(mix);
  m.signal = sig;
  m.disorder = std::move(dis);
  check_model_state(m);
  return m;
}

void noise_energy_terms(const Model& mdl, const double* x, double* per_term) {
  check_model_state(mdl);
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    per_term[i] =
        term_coeff(mdl.mixture.terms[i], mdl.N) * term_energy_raw(mdl.disorder.tensors[i], x);
}

double noise_energy(const Model& mdl, const double* x) {
  check_model_state(mdl);
  double s = 0;
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    s += term_coeff(mdl.mixture.terms[i], mdl.N) * term_energy_raw(mdl.disorder.tensors[i], x);
  return s;
}

double signal_energy(const Model& mdl, const double* x) {
  return -static_cast<double>(mdl.N) * mdl.signal.lambda *
         phi(mdl.signal.k, overlap_m(x, mdl.N));
}

double total_energy(const Model& mdl, const double* x) {
  return noise_energy(mdl, x) + signal_energy(mdl, x);
}

void noise_gradient(const Model& mdl, const double* x, double* out) {
  check_model_state(mdl);
  std::memset(out, 0, static_cast<std::size_t>(mdl.N) * sizeof(double));
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    term_gradient_raw(mdl.disorder.tensors[i], x, term_coeff(mdl.mixture.terms[i], mdl.N), out);
}

void noise_gradient_weighted(const Model& mdl, const double* x, const double* term_weights,
                             double* out) {
  check_model_state(mdl);
  std::memset(out, 0, static_cast<std::size_t>(mdl.N) * sizeof(double));
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i) {
    const double c = term_weights[i] * term_coeff(mdl.mixture.terms[i], mdl.N);
    if (c != 0) term_gradient_raw(mdl.disorder.tensors[i], x, c, out);
  }
}

void signal_gradient(const Model& mdl, const double* x, double* out) {
  std::memset(out, 0, static_cast<std::size_t>(mdl.N) * sizeof(double));
  out[0] = -std::sqrt(static_cast<double>(mdl.N)) * mdl.signal.lambda *
           phi_d1(mdl.signal.k, overlap_m(x, mdl.N));
}

void total_gradient(const Model& mdl, const double* x, double* out) {
  noise_gradient(mdl, x, out);
  out[0] += -std::sqrt(static_cast<double>(mdl.N)) * mdl.signal.lambda *
            phi_d1(mdl.signal.k, overlap_m(x, mdl.N));
}

void covariant_gradient(const Model& mdl, const double* x, double* out) {
  total_gradient(mdl, x, out);
  project_tangent(x, out, mdl.N);
}

void noise_hvp(const Model& mdl, const double* x, const double* v, double* out) {
  check_model_state(mdl);
  std::memset(out, 0, static_cast<std::size_t>(mdl.N) * sizeof(double));
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    term_hvp_raw(mdl.disorder.tensors[i], x, v, term_coeff(mdl.mixture.terms[i], mdl.N), out);
}

void total_hvp(const Model& mdl, const double* x, const double* v, double* out) {
  noise_hvp(mdl, x, v, out);
  out[0] += -mdl.signal.lambda * phi_d2(mdl.signal.k, overlap_m(x, mdl.N)) * v[0];
}

double noise_hessian_trace(const Model& mdl, const double* x) {
  check_model_state(mdl);
  double s = 0;
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    s += term_coeff(mdl.mixture.terms[i], mdl.N) *
         term_hessian_trace_raw(mdl.disorder.tensors[i], x);
  return s;
}

double noise_hessian_trace_weighted(const Model& mdl, const double* x,
                                    const double* term_weights) {
  check_model_state(mdl);
  double s = 0;
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i) {
    const double c = term_weights[i] * term_coeff(mdl.mixture.terms[i], mdl.N);
    if (c != 0) s += c * term_hessian_trace_raw(mdl.disorder.tensors[i], x);
  }
  return s;
}

void riemannian_hvp(const Model& mdl, const double* x, const double* v, double* out) {
  const auto n = static_cast<std::size_t>(mdl.N);
  double* pv = detail::scratch(n, kSlotRHvpA);
  double* hpv = detail::scratch(n, kSlotRHvpB);
  double* g = detail::scratch(n, kSlotRHvpC);
  std::memcpy(pv, v, n * sizeof(double));
  project_tangent(x, pv, mdl.N);
  total_hvp(mdl, x, pv, hpv);
  project_tangent(x, hpv, mdl.N);
  total_gradient(mdl, x, g);
  const double radial = kernels().dot(x, g, n) / mdl.N;
  for (std::size_t i = 0; i < n; ++i) out[i] = hpv[i] - radial * pv[i];
}

double riemannian_hessian_opnorm(const Model& mdl, const double* x, int iters,
                                 std::uint64_t seed) {
  if (iters < 1) fail("riemannian_hessian_opnorm: iters must be >= 1");
  const auto n = static_cast<std::size_t>(mdl.N);
  Vec v(n), av(n);
  Rng rng(derive_seed(seed, {0x6f706eULL}));
  rng.fill_gaussian(v.data(), n);
  project_tangent(x, v.data(), mdl.N);
  double norm = 0;
  for (int it = 0; it < iters; ++it) {
    double s = std::sqrt(kernels().dot(v.data(), v.data(), n));
    if (s == 0) fail("riemannian_hessian_opnorm: degenerate iterate");
    for (std::size_t i = 0; i < n; ++i) v[i] /= s;
    riemannian_hvp(mdl, x, v.data(), av.data());
    norm = std::sqrt(kernels().dot(av.data(), av.data(), n));
    // |Av| grows toward the top singular value; the Hessian may be indefinite,
    // so iterate on A v itself (power iteration on A^2 in effect).
    v.swap(av);
  }
  return norm;
}

void noise_third_diag(const Model& mdl, const double* x, double* out) {
  check_model_state(mdl);
  std::memset(out, 0, static_cast<std::size_t>(mdl.N) * sizeof(double));
  for (std::size_t i = 0; i < mdl.mixture.terms.size(); ++i)
    term_third_diag_raw(mdl.disorder.tensors[i], x, term_coeff(mdl.mixture.terms[i], mdl.N), out);
}

double reference_contraction_scalar(const Tensor& t, const std::vector<Slot>& slots,
                                    const double* x, const double* v) {
  validate_ref_slots(t, slots, 0);
  RefCtx c{&t, &slots, x, v};
  return ref_eval_with_diag(c);
}

void reference_contraction_vec(const Tensor& t, const std::vector<Slot>& slots, const double* x,
                               const double* v, double* out) {
  validate_ref_slots(t, slots, 1);
  RefCtx c{&t, &slots, x, v};
  for (int i = 0; i < t.N; ++i) {
    c.free_idx = i;
    out[i] = ref_eval_with_diag(c);
  }
}

}  // namespace spikelab
