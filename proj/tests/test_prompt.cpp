#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "selfpro/digest.hpp"
#include "selfpro/error.hpp"
#include "selfpro/gradcheck.hpp"
#include "selfpro/pretrain.hpp"
#include "selfpro/prompt.hpp"

using namespace selfpro;

namespace {

TrainState small_state(int n_features, int dim, std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.hidden = dim;
  cfg.seed = seed;
  return init_train_state(n_features, cfg);
}

TokenSet tokens_of(Matrix m) {
  TokenSet t;
  t.tokens = std::move(m);
  return t;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::usage;
}

}  // namespace

TEST_CASE("similarity") {
  RowVector a(2), b(2), z(2), c(3);
  a << 1, 2;
  b << 3, 4;
  z << 0, 0;
  c << 1, 1, 1;
  CHECK(similarity(a, b, SimKind::dot) == 11.0);
  CHECK(similarity(a, b, SimKind::cosine) == doctest::Approx(11.0 / (std::sqrt(5.0) * 5.0)));
  CHECK(similarity(a, 2.5 * a, SimKind::cosine) == doctest::Approx(1.0));
  CHECK(similarity(a, -a, SimKind::cosine) == doctest::Approx(-1.0));
  CHECK(kind_of([&] { similarity(a, z, SimKind::cosine); }) == ErrorKind::similarity);
  CHECK(kind_of([&] { similarity(a, c, SimKind::dot); }) == ErrorKind::shape);
  CHECK(similarity(a, z, SimKind::dot) == 0.0);
}

TEST_CASE("fixed injection") {
  Matrix hm = Matrix::Random(6, 4);
  Matrix sm = Matrix::Random(6, 4);
  const TokenSet h = tokens_of(hm), s = tokens_of(sm);
  PromptConfig cfg;
  cfg.mu = 0.0;
  CHECK(inject(h, s, cfg).tokens == hm);
  cfg.mu = 1.0;
  CHECK(inject(h, s, cfg).tokens == sm);
  for (double mu : {0.1, 0.5, 0.9}) {
    cfg.mu = mu;
    const TokenSet t = inject(h, s, cfg);
    CHECK(t.provenance == TokenKind::injected);
    CHECK(!t.weights);
    const Matrix lo = hm.cwiseMin(sm).array() - 1e-15;
    const Matrix hi = hm.cwiseMax(sm).array() + 1e-15;
    CHECK((t.tokens.array() >= lo.array()).all());
    CHECK((t.tokens.array() <= hi.array()).all());
    CHECK((t.tokens - (mu * sm + (1 - mu) * hm)).cwiseAbs().maxCoeff() < 1e-15);
  }
  cfg.mu = 1.5;
  CHECK(kind_of([&] { inject(h, s, cfg); }) == ErrorKind::argument);
  CHECK(kind_of([&] { inject(h, tokens_of(Matrix::Random(5, 4)), cfg); }) == ErrorKind::shape);
}

TEST_CASE("self-weight injection") {
  Matrix hm(3, 2);
  hm << 1, 0, 0, 2, 3, 3;
  Matrix sm(3, 2);
  sm << 2, 0, 0, -1, -3, 3;
  PromptConfig cfg;
  cfg.injection = Injection::self_weight;
  const TokenSet t = inject(tokens_of(hm), tokens_of(sm), cfg);
  REQUIRE(t.weights);
  // parallel -> w = 1, opposite -> w = 0, orthogonal -> w = 1/2
  CHECK((*t.weights)[0] == doctest::Approx(1.0));
  CHECK((*t.weights)[1] == doctest::Approx(0.0));
  CHECK((*t.weights)[2] == doctest::Approx(0.5));
  CHECK(t.tokens.row(0).isApprox(sm.row(0)));
  CHECK(t.tokens.row(1).isApprox(hm.row(1)));
  CHECK(t.tokens.row(2).isApprox(0.5 * (hm.row(2) + sm.row(2))));
  CHECK(((t.weights->array() >= 0) && (t.weights->array() <= 1)).all());
}

TEST_CASE("prompt token views") {
  const Graph g = testutil::connected_graph(15, 0.2, 5, 7);
  const TrainState s = small_state(5, 6, 3);

  SUBCASE("semantic tokens are row-local") {
    const TokenSet sem = semantic_tokens(s, g);
    CHECK(sem.provenance == TokenKind::semantic);
    Matrix x = g.features();
    x.row(4) *= -3.0;
    const TokenSet moved = semantic_tokens(s, Graph(g.edges(), x));
    for (int v = 0; v < 15; ++v) {
      if (v == 4) continue;
      CHECK(moved.tokens.row(v) == sem.tokens.row(v));
    }
    CHECK(moved.tokens.row(4) != sem.tokens.row(4));
  }
  SUBCASE("a triangle is its own two-hop union") {
    const EdgePair e[] = {{0, 1}, {1, 2}, {0, 2}};
    const Graph tri(e, Matrix::Random(3, 5));
    CHECK(structural_tokens(s, tri, TwoHopMode::union_).tokens == contextual_tokens(s, tri).tokens);
  }
  SUBCASE("union two-hop of an edgeless graph is the semantic view") {
    const Graph bare(std::span<const EdgePair>{}, g.features());
    CHECK(structural_tokens(s, bare, TwoHopMode::union_).tokens == semantic_tokens(s, g).tokens);
  }
  SUBCASE("build_tokens follows the mode") {
    PromptConfig cfg;
    CHECK(build_tokens(s, g, cfg).tokens == contextual_tokens(s, g).tokens);
    CHECK(build_tokens(s, g, cfg).provenance == TokenKind::contextual);
    cfg.mode = PromptMode::semantic;
    cfg.mu = 1.0;
    CHECK(build_tokens(s, g, cfg).tokens == semantic_tokens(s, g).tokens);
    cfg.mode = PromptMode::structural;
    cfg.mu = 0.0;
    CHECK(build_tokens(s, g, cfg).tokens == contextual_tokens(s, g).tokens);
  }
}

TEST_CASE("prototypes") {
  Matrix m(5, 2);
  m << 1, 0, 3, 0, 0, 5, 9, 9, 0, 1;
  const TokenSet t = tokens_of(m);
  SplitSpec split;
  split.train_nodes = {0, 1, 2, 4};
  split.test_nodes = {3};
  const LabelGuard guard({0, 0, 1, 0, 1}, 2, &split);
  const PrototypeSet p = init_prototypes(t, split, guard);
  REQUIRE(p.n_classes() == 2);
  CHECK(p.tokens.row(0) == RowVector{{2.0, 0.0}});
  CHECK(p.tokens.row(1) == RowVector{{0.0, 3.0}});
  CHECK(guard.reads(LabelGuard::Role::test) == 0);

  const LabelGuard three({0, 0, 1, 0, 1}, 3, &split);
  try {
    init_prototypes(t, split, three);
    FAIL("expected a prototype error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::prototype);
    CHECK(std::string(e.what()).find("class 2") != std::string::npos);
  }
}

TEST_CASE("node template loss") {
  const ProjectorParams proj = init_projector(4, 2, true, 3);
  const Matrix tokens = Matrix::Random(7, 4);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 2};

  SUBCASE("identical prototypes give n log C") {
    PrototypeSet p;
    p.tokens = RowVector::Random(4).replicate(3, 1);
    for (SimKind k : {SimKind::dot, SimKind::cosine}) {
      CHECK(node_template_loss(proj, tokens, y, p, 0.3, k) == doctest::Approx(7 * std::log(3.0)).epsilon(1e-12));
    }
  }
  SUBCASE("gradients") {
    PrototypeSet p;
    p.tokens = Matrix::Random(3, 4);
    for (SimKind k : {SimKind::dot, SimKind::cosine}) {
      ProjectorParams q = proj;
      LossFn f = [&](std::vector<Matrix>* grads) { return node_template_loss(q, tokens, y, p, 0.5, k, grads); };
      CHECK(grad_check(f, q.tensors(), 1e-6, 60, 4).max_rel_error < 1e-4);
    }
  }
  SUBCASE("errors") {
    PrototypeSet p;
    p.tokens = Matrix::Random(3, 4);
    const std::vector<int> short_y = {0, 1};
    CHECK(kind_of([&] { node_template_loss(proj, tokens, short_y, p, 0.5, SimKind::dot); }) == ErrorKind::shape);
    CHECK(kind_of([&] { node_template_loss(proj, tokens, y, p, 0.0, SimKind::dot); }) == ErrorKind::argument);
  }
}

TEST_CASE("prediction") {
  const ProjectorParams proj = init_projector(3, 1, false, 8);
  PrototypeSet same;
  same.tokens = RowVector::Random(3).replicate(4, 1);
  const TokenSet t = tokens_of(Matrix::Random(5, 3));
  for (int v = 0; v < 5; ++v) CHECK(predict_class(proj, same, t, v, SimKind::dot) == 0);

  PrototypeSet p;
  p.tokens = Matrix::Random(4, 3);
  std::vector<NodeId> all = {0, 1, 2, 3, 4};
  const auto base = predict_classes(proj, p, t, all, SimKind::cosine);
  const TokenSet scaled = tokens_of(t.tokens * 3.0);
  CHECK(predict_classes(proj, p, scaled, all, SimKind::cosine) == base);
  for (int v = 0; v < 5; ++v) CHECK(predict_class(proj, p, t, v, SimKind::cosine) == base[v]);

  PrototypeSet ident;
  ident.tokens = Matrix::Identity(3, 3);
  Matrix m(2, 3);
  m << 0.1, 0.9, 0.2, 5, -1, 0;
  const std::vector<NodeId> two = {0, 1};
  CHECK(predict_raw(ident, tokens_of(m), two, SimKind::dot) == std::vector<int>{1, 0});
}

TEST_CASE("link template loss") {
  const ProjectorParams proj = init_projector(3, 2, false, 2);
  SUBCASE("tie gives log 2 per triplet") {
    Matrix m(3, 3);
    m << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    const Triplet tr[] = {{0, 1, 2}};
    for (SimKind k : {SimKind::dot, SimKind::cosine}) {
      CHECK(link_template_loss(identity_projector(3), m, tr, 0.5, k) == doctest::Approx(std::log(2.0)));
    }
  }
  SUBCASE("gradients") {
    const Matrix m = Matrix::Random(6, 3);
    const Triplet tr[] = {{0, 1, 2}, {3, 4, 5}, {1, 0, 5}, {2, 2, 3}};
    for (SimKind k : {SimKind::dot, SimKind::cosine}) {
      ProjectorParams q = proj;
      LossFn f = [&](std::vector<Matrix>* grads) { return link_template_loss(q, m, tr, 0.4, k, grads); };
      CHECK(grad_check(f, q.tensors(), 1e-6, 60, 5).max_rel_error < 1e-4);
    }
  }
  SUBCASE("scores are symmetric") {
    const TokenSet t = tokens_of(Matrix::Random(5, 3));
    for (int u = 0; u < 5; ++u) {
      for (int v = 0; v < 5; ++v) CHECK(score_link(proj, t, u, v) == doctest::Approx(score_link(proj, t, v, u)));
    }
    const EdgePair pairs[] = {{0, 3}, {4, 1}};
    const auto s = score_links(proj, t, pairs);
    CHECK(s[1] == doctest::Approx(score_link(proj, t, 1, 4)));
    const auto c = score_links(proj, t, pairs, SimKind::cosine);
    const Matrix p = project(proj, t.tokens);
    CHECK(c[0] == doctest::Approx(p.row(0).dot(p.row(3)) / (p.row(0).norm() * p.row(3).norm())));
    CHECK(std::abs(c[1]) <= 1.0);
  }
}

TEST_CASE("sample_triplets") {
  const Graph g = testutil::random_graph(30, 0.15, 1, 4);
  const auto tr = sample_triplets(g, 9);
  std::size_t expected = 0;
  for (int v = 0; v < 30; ++v) {
    if (g.degree(v) > 0 && g.degree(v) < 29) expected += g.degree(v);
  }
  CHECK(tr.size() == expected);
  for (const auto& t : tr) {
    CHECK(g.has_edge(t.anchor, t.positive));
    CHECK(!g.has_edge(t.anchor, t.negative));
    CHECK(t.negative != t.anchor);
  }
  const auto again = sample_triplets(g, 9);
  REQUIRE(again.size() == tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(again[i].negative == tr[i].negative);
}

TEST_CASE("node prompt tuning") {
  const EdgePair e[] = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {2, 3}};
  Matrix x(6, 3);
  x << 1, 0, 0.2, 0.9, 0.1, 0, 1, 0.2, 0.1, 0, 1, 0.3, 0.1, 0.9, 0, 0, 1, 0.1;
  const Graph g(e, x, std::vector<int>{0, 0, 0, 1, 1, 1}, 2);
  const TrainState s = small_state(3, 4, 1);
  const std::string before = params_digest(s.online) + params_digest(s.projector);
  SplitSpec split;
  split.train_nodes = {0, 1, 3, 4};
  split.val_nodes = {2, 5};
  PromptConfig cfg;
  cfg.tune_lr = 0.01;
  cfg.tune_epochs = 100;
  cfg.patience = 0;
  const auto r = tune_node_classification(s, g, split, cfg);
  REQUIRE(r.loss_trace.size() == 100);
  CHECK(r.loss_trace.back() < r.loss_trace.front());
  CHECK(r.val_trace.size() == 101);
  CHECK(params_digest(s.online) + params_digest(s.projector) == before);

  const auto again = tune_node_classification(s, g, split, cfg);
  CHECK(again.projector.weights == r.projector.weights);

  cfg.tau_tune = 0;
  CHECK(kind_of([&] { tune_node_classification(s, g, split, cfg); }) == ErrorKind::argument);
  cfg.tau_tune = 0.5;
  split.train_nodes.clear();
  CHECK(kind_of([&] { tune_node_classification(s, g, split, cfg); }) == ErrorKind::split);
}

TEST_CASE("link prompt tuning") {
  const Graph g = testutil::connected_graph(40, 0.15, 4, 6);
  const TrainState s = small_state(4, 5, 2);
  const EdgeSplit split = split_edges(g, 0.2, 0.1, 3);
  const Graph train = g.with_edges(split.train_edges);
  PromptConfig cfg;
  cfg.tune_lr = 0.01;
  cfg.tune_epochs = 50;
  cfg.patience = 0;
  const auto r = tune_link_prediction(s, contextual_tokens(s, train), split, cfg);
  REQUIRE(r.loss_trace.size() == 50);
  CHECK(r.loss_trace.back() < r.loss_trace.front());
  CHECK(r.best_epoch >= 0);
  CHECK(r.best_epoch <= 50);
  CHECK(r.val_trace.size() == 51);
}
