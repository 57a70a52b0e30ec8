#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstring>

#include "sheetsew/multiindex.hpp"
#include "sheetsew/rng.hpp"

using namespace sheetsew;

namespace {

// Deterministic pseudo-random germ/function tables keyed on coordinates.
double hashed_value(std::initializer_list<double> coords, std::uint64_t salt = 0)
{
    std::uint64_t h = 0x9E3779B97F4A7C15ull ^ salt;
    for (double c : coords) {
        std::uint64_t bits;
        std::memcpy(&bits, &c, sizeof(bits));
        h = detail::splitmix64(h ^ bits);
    }
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 * 2.0 - 1.0;
}

double hashed_point_fn(const Point& p, std::uint64_t salt = 0)
{
    std::uint64_t h = 0xABCDEF ^ salt;
    for (int i = 0; i < p.dim; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &p.v[i], sizeof(bits));
        h = detail::splitmix64(h ^ bits);
    }
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 * 2.0 - 1.0;
}

// Random pair s <= u <= t in [0,1]^d.
struct Triple {
    Point s, u, t;
};
Triple random_triple(RandomStream& rng, int d)
{
    Triple tr{Point(d), Point(d), Point(d)};
    for (int i = 0; i < d; ++i) {
        double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        tr.s.v[i] = a;
        tr.u.v[i] = b;
        tr.t.v[i] = c;
    }
    return tr;
}

}  // namespace

TEST_CASE("IndexSet basics")
{
    auto theta = IndexSet::of(3, {0, 2});
    CHECK(theta.size() == 2);
    CHECK(theta.contains(0));
    CHECK_FALSE(theta.contains(1));
    CHECK(theta.complement() == IndexSet::of(3, {1}));
    CHECK(theta.complement().complement() == theta);
    CHECK((theta.bits | theta.complement().bits) == IndexSet::full(3).bits);

    int count = 0;
    for_each_subset(IndexSet::full(4), [&](const IndexSet&) { ++count; });
    CHECK(count == 16);

    CHECK_THROWS_AS(IndexSet::of(2, {5}), std::invalid_argument);
    CHECK_THROWS_AS(IndexSet::empty(9), std::invalid_argument);
}

TEST_CASE("project")
{
    Point base{1.0, 2.0}, target{3.0, 4.0};
    auto r = project(base, target, IndexSet::of(2, {0}));
    CHECK(r == Point{1.0, 4.0});

    CHECK(project(base, target, IndexSet::empty(2)) == target);
    CHECK(project(base, target, IndexSet::full(2)) == base);

    // idempotence
    auto theta = IndexSet::of(2, {1});
    auto once = project(base, target, theta);
    CHECK(project(base, once, theta) == once);

    CHECK_THROWS_AS(project(Point{1.0}, target, theta), std::invalid_argument);
}

TEST_CASE("square_increment examples")
{
    auto full2 = IndexSet::full(2);

    auto constant = [](const Point&) { return 3.7; };
    CHECK(square_increment(constant, Rect(Point{0.1, 0.2}, Point{0.9, 0.8}), full2) == 0.0);

    auto prod = [](const Point& p) { return p[0] * p[1]; };
    CHECK(square_increment(prod, Rect(Point{0.0, 0.0}, Point{1.0, 1.0}), full2) ==
          Catch::Approx(1.0));

    auto f = [](const Point& p) { return p[0] * p[0] * p[1]; };
    CHECK(square_increment(f, Rect(Point{1.0, 1.0}, Point{2.0, 3.0}), full2) ==
          Catch::Approx(6.0));

    // theta empty evaluates f at the lower corner
    CHECK(square_increment(f, Rect(Point{1.0, 1.0}, Point{2.0, 3.0}), IndexSet::empty(2)) ==
          Catch::Approx(1.0));
}

TEST_CASE("square_increment equals the smooth mixed-derivative integral")
{
    // f(t) = sin(t1) * exp(t2): box increment = (sin t1 - sin s1)*(e^{t2}-e^{s2})
    auto f = [](const Point& p) { return std::sin(p[0]) * std::exp(p[1]); };
    Rect box(Point{0.3, 0.1}, Point{1.1, 0.7});
    const double expected =
        (std::sin(1.1) - std::sin(0.3)) * (std::exp(0.7) - std::exp(0.1));
    CHECK(square_increment(f, box, IndexSet::full(2)) == Catch::Approx(expected));
}

TEST_CASE("inclusion-exclusion equals product form on random tables")
{
    RandomStream rng(42, derive_stream(1));
    for (int d = 1; d <= 3; ++d) {
        for (int trial = 0; trial < 400; ++trial) {
            auto tr = random_triple(rng, d);
            Rect box(tr.s, tr.t);
            const std::uint32_t theta_bits = rng.next_u32() & IndexSet::mask(d);
            IndexSet theta{theta_bits, d};
            auto f = [&](const Point& p) { return hashed_point_fn(p, 7); };

            // independent oracle: fold (pi^i_t - Id) over i in theta, applied to f at s
            std::function<double(const Point&)> g = f;
            for (int i = 0; i < d; ++i) {
                if (!theta.contains(i)) continue;
                auto prev = g;
                const Point t = tr.t;
                g = [prev, t, i](const Point& p) {
                    return prev(project_axis(t, p, i)) - prev(p);
                };
            }
            const double oracle = g(tr.s);
            const double got = square_increment(f, box, theta);
            const double scale = std::max(1.0, std::abs(oracle));
            CHECK(std::abs(got - oracle) <= 1e-12 * scale);
        }
    }
}

TEST_CASE("psi_apply examples")
{
    auto germ = [](const Point& s, const Point& t) {
        return (t[0] - s[0]) * (t[0] - s[0]);
    };
    Rect box(Point{0.0}, Point{1.0});
    CHECK(psi_apply(germ, Point{0.5}, IndexSet::of(1, {0}), box) == Catch::Approx(0.5));

    // eta empty: both projections are the identity
    CHECK(psi_apply(germ, Point{0.3}, IndexSet::empty(1), box) == Catch::Approx(2.0));

    CHECK_THROWS_AS(psi_apply(germ, Point{1.5}, IndexSet::of(1, {0}), box),
                    std::invalid_argument);

    // additive germ: psi^i is the identity in direction i
    auto f = [](const Point& p) { return std::sin(p[0] + 0.3) * std::cos(p[1]); };
    auto additive = [&](const Point& s, const Point& t) {
        return square_increment(f, Rect(s, t), IndexSet::full(2));
    };
    Rect box2(Point{0.1, 0.2}, Point{0.8, 0.9});
    const double xi = additive(box2.lo, box2.hi);
    CHECK(psi_apply(additive, Point{0.4, 0.5}, IndexSet::of(2, {0}), box2) ==
          Catch::Approx(xi));
}

TEST_CASE("delta_apply examples")
{
    auto germ = [](const Point& s, const Point& t) {
        return (t[0] - s[0]) * (t[0] - s[0]) * (t[1] - s[1]);
    };
    Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
    CHECK(delta_apply(germ, Point{0.5, 0.5}, IndexSet::of(2, {0}), box) == Catch::Approx(0.5));

    CHECK_THROWS_AS(delta_apply(germ, Point{0.5, 0.5}, IndexSet::empty(2), box),
                    std::invalid_argument);

    // 9-term expansion for theta = {1,2} matches the explicit d=2 sum
    auto xi = [](const Point& s, const Point& t) { return hashed_value({s[0], s[1], t[0], t[1]}); };
    RandomStream rng(7, derive_stream(2));
    for (int trial = 0; trial < 200; ++trial) {
        auto tr = random_triple(rng, 2);
        const Point s = tr.s, u = tr.u, t = tr.t;
        const double expanded =
            xi(s, t) - (xi(s, Point{u[0], t[1]}) + xi(Point{u[0], s[1]}, t)) -
            (xi(s, Point{t[0], u[1]}) + xi(Point{s[0], u[1]}, t)) +
            (xi(s, u) + xi(Point{s[0], u[1]}, Point{u[0], t[1]}) +
             xi(Point{u[0], s[1]}, Point{t[0], u[1]}) + xi(u, t));
        CHECK(delta_apply(xi, u, IndexSet::full(2), Rect(s, t)) ==
              Catch::Approx(expanded).margin(1e-14));
    }
}

TEST_CASE("delta factorizes into singletons in any order")
{
    auto xi = [](const Point& s, const Point& t) {
        return hashed_value({s[0], s[1], s[2], t[0], t[1], t[2]}, 5);
    };
    RandomStream rng(11, derive_stream(3));
    for (int trial = 0; trial < 100; ++trial) {
        auto tr = random_triple(rng, 3);
        Rect box(tr.s, tr.t);
        const Point u = tr.u;
        auto theta = IndexSet::of(3, {0, 2});

        auto once = [&](int axis, auto&& g) {
            return [axis, u, g](const Point& s, const Point& t) {
                return delta_apply(g, u, IndexSet::singleton(3, axis), Rect(s, t));
            };
        };
        const double joint = delta_apply(xi, u, theta, box);
        const double seq02 = once(0, xi)(box.lo, box.hi),
                     seq_d0 = delta_apply(once(0, xi), u, IndexSet::singleton(3, 2), box),
                     seq_d2 = delta_apply(once(2, xi), u, IndexSet::singleton(3, 0), box);
        (void)seq02;
        CHECK(joint == Catch::Approx(seq_d0).margin(1e-13));
        CHECK(joint == Catch::Approx(seq_d2).margin(1e-13));
    }
}

TEST_CASE("additive germs are exactly the delta kernel")
{
    RandomStream rng(13, derive_stream(4));
    auto f = [](const Point& p) { return hashed_point_fn(p, 99); };
    auto additive = [&](const Point& s, const Point& t) {
        return square_increment(f, Rect(s, t), IndexSet::full(2));
    };
    for (int trial = 0; trial < 300; ++trial) {
        auto tr = random_triple(rng, 2);
        Rect box(tr.s, tr.t);
        for_each_subset(IndexSet::full(2), [&](const IndexSet& theta) {
            if (theta.is_empty()) return;
            CHECK(std::abs(delta_apply(additive, tr.u, theta, box)) <= 1e-12);
        });
    }

    // converse: a non-additive germ is detected
    auto bad = [](const Point& s, const Point& t) {
        return (t[0] - s[0]) * (t[0] - s[0]) * (t[1] - s[1]);
    };
    CHECK(std::abs(delta_apply(bad, Point{0.5, 0.5}, IndexSet::of(2, {0}),
                               Rect(Point{0.0, 0.0}, Point{1.0, 1.0}))) > 0.1);
}

TEST_CASE("psi/delta decomposition identity in d=2")
{
    // Id - psi^1 psi^2 = delta^1_u + delta^2_u - delta^{(1,2)}_u
    RandomStream rng(17, derive_stream(5));
    auto xi = [](const Point& s, const Point& t) {
        return hashed_value({s[0], s[1], t[0], t[1]}, 31);
    };
    for (int trial = 0; trial < 300; ++trial) {
        auto tr = random_triple(rng, 2);
        Rect box(tr.s, tr.t);
        const double lhs = xi(box.lo, box.hi) - psi_compose(xi, tr.u, IndexSet::full(2), box);
        const double rhs = delta_apply(xi, tr.u, IndexSet::of(2, {0}), box) +
                           delta_apply(xi, tr.u, IndexSet::of(2, {1}), box) -
                           delta_apply(xi, tr.u, IndexSet::full(2), box);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-13));
    }

    // psi_compose cuts an additive germ into pieces that sum back exactly
    auto f = [](const Point& p) { return hashed_point_fn(p, 12); };
    auto additive = [&](const Point& s, const Point& t) {
        return square_increment(f, Rect(s, t), IndexSet::full(2));
    };
    for (int trial = 0; trial < 100; ++trial) {
        auto tr = random_triple(rng, 2);
        Rect box(tr.s, tr.t);
        CHECK(psi_compose(additive, tr.u, IndexSet::full(2), box) ==
              Catch::Approx(additive(box.lo, box.hi)).margin(1e-12));
    }
}

TEST_CASE("dyadic_partition")
{
    Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
    auto p = dyadic_partition(box, std::array<int, kMaxDim>{1, 1}, IndexSet::full(2));
    p.validate();
    CHECK(p.axes[0] == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(p.axes[1] == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(p.cell_count() == 4);
    CHECK(p.mesh() == Catch::Approx(0.5));

    auto trivial = dyadic_partition(box, std::array<int, kMaxDim>{0, 0}, IndexSet::full(2));
    CHECK(trivial.cell_count() == 1);

    auto axis0 = dyadic_partition(box, std::array<int, kMaxDim>{2, 0}, IndexSet::of(2, {0}));
    CHECK(axis0.axes[0] == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(axis0.axes[1] == std::vector<double>{0.0, 1.0});

    // degenerate active axis yields a single-cell axis
    Rect flat(Point{0.0, 0.5}, Point{1.0, 0.5});
    auto pf = dyadic_partition(flat, 3, IndexSet::full(2));
    pf.validate();
    CHECK(pf.axes[1] == std::vector<double>{0.5});
    CHECK(pf.cell_count() == 8);
}

TEST_CASE("clamp_partition")
{
    GridPartition src;
    src.active = IndexSet::full(1);
    src.axes = {{0.0, 0.3, 0.7, 1.0}};
    src.validate();

    auto clamped = clamp_partition(src, Rect(Point{0.4}, Point{0.9}));
    CHECK(clamped.axes[0] == std::vector<double>{0.4, 0.7, 0.9});

    // rect equal to the box reproduces the source after dedup
    auto same = clamp_partition(src, src.box());
    CHECK(same.axes[0] == src.axes[0]);

    // rect strictly inside one source cell collapses to the trivial partition
    auto inside = clamp_partition(src, Rect(Point{0.35}, Point{0.65}));
    CHECK(inside.axes[0] == std::vector<double>{0.35, 0.65});

    CHECK_THROWS_AS(clamp_partition(src, Rect(Point{-0.1}, Point{0.5})),
                    std::invalid_argument);

    // random property: output always satisfies the partition invariants
    RandomStream rng(23, derive_stream(6));
    for (int trial = 0; trial < 200; ++trial) {
        GridPartition s2;
        s2.active = IndexSet::full(2);
        s2.axes.resize(2);
        for (int i = 0; i < 2; ++i) {
            s2.axes[i].push_back(0.0);
            int k = 1 + static_cast<int>(rng.uniform(0, 5));
            for (int j = 0; j < k; ++j) s2.axes[i].push_back(rng.uniform());
            s2.axes[i].push_back(1.0);
            std::sort(s2.axes[i].begin(), s2.axes[i].end());
            s2.axes[i].erase(std::unique(s2.axes[i].begin(), s2.axes[i].end()),
                             s2.axes[i].end());
        }
        double a0 = rng.uniform(), b0 = rng.uniform();
        if (a0 > b0) std::swap(a0, b0);
        double a1 = rng.uniform(), b1 = rng.uniform();
        if (a1 > b1) std::swap(a1, b1);
        auto out = clamp_partition(s2, Rect(Point{a0, a1}, Point{b0, b1}));
        CHECK_NOTHROW(out.validate());
        CHECK(out.lo() == Point{a0, a1});
        CHECK(out.hi() == Point{b0, b1});
    }
}

TEST_CASE("neighbors")
{
    Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
    auto p = dyadic_partition(box, 1, IndexSet::full(2));

    auto [lo1, hi1] = neighbors(p, Point{0.5, 0.5});
    CHECK(lo1 == Point{0.5, 0.5});
    CHECK(hi1 == Point{0.5, 0.5});

    auto [lo2, hi2] = neighbors(p, Point{0.3, 0.3});
    CHECK(lo2 == Point{0.0, 0.0});
    CHECK(hi2 == Point{0.5, 0.5});

    // node on axis 0, interior on axis 1
    auto [lo3, hi3] = neighbors(p, Point{0.5, 0.8});
    CHECK(lo3 == Point{0.5, 0.5});
    CHECK(hi3 == Point{0.5, 1.0});

    CHECK_THROWS_AS(neighbors(p, Point{1.5, 0.0}), std::invalid_argument);
}

TEST_CASE("riemann_sum")
{
    Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});

    // additive germ telescopes for every partition
    auto f = [](const Point& p) { return std::sin(3 * p[0]) * (p[1] + 0.5) * (p[1] + 0.5); };
    auto additive = [&](const Point& s, const Point& t) {
        return square_increment(f, Rect(s, t), IndexSet::full(2));
    };
    const double total = additive(box.lo, box.hi);
    for (int level = 0; level <= 4; ++level) {
        auto p = dyadic_partition(box, level, IndexSet::full(2));
        CHECK(riemann_sum(additive, p) == Catch::Approx(total).margin(1e-12));
    }
    RandomStream rng(31, derive_stream(7));
    for (int trial = 0; trial < 50; ++trial) {
        GridPartition p;
        p.active = IndexSet::full(2);
        p.axes.resize(2);
        for (int i = 0; i < 2; ++i) {
            p.axes[i] = {0.0, 1.0};
            for (int j = 0; j < 6; ++j) p.axes[i].push_back(rng.uniform());
            std::sort(p.axes[i].begin(), p.axes[i].end());
            p.axes[i].erase(std::unique(p.axes[i].begin(), p.axes[i].end()), p.axes[i].end());
        }
        CHECK(riemann_sum(additive, p) == Catch::Approx(total).margin(1e-12));
    }

    // power germ: level-n sum is 2^{-2n}
    auto power = [](const Point& s, const Point& t) {
        return (t[0] - s[0]) * (t[0] - s[0]) * (t[1] - s[1]) * (t[1] - s[1]);
    };
    for (int n = 0; n <= 5; ++n) {
        auto p = dyadic_partition(box, n, IndexSet::full(2));
        CHECK(riemann_sum(power, p) == Catch::Approx(std::pow(2.0, -2.0 * n)));
    }

    // single cell
    auto single = dyadic_partition(box, 0, IndexSet::full(2));
    CHECK(riemann_sum(power, single) == Catch::Approx(1.0));
}

TEST_CASE("weight_eval")
{
    CHECK(weight_eval(Weight{0.0, 0.0}, Rect(Point{0.0, 0.0}, Point{0.0, 3.0})) == 1.0);
    CHECK(weight_eval(Weight{1.0, 1.0}, Rect(Point{0.0, 0.0}, Point{2.0, 3.0})) ==
          Catch::Approx(6.0));
    CHECK(weight_eval(Weight{0.5, 0.5}, Rect(Point{0.0, 0.0}, Point{4.0, 9.0})) ==
          Catch::Approx(6.0));
    CHECK_THROWS_AS(weight_eval(Weight{-1.0}, Rect(Point{1.0}, Point{1.0})),
                    std::domain_error);

    auto w = Weight::on(IndexSet::of(2, {0}), 2.0, 0.5);
    CHECK(weight_eval(w, Rect(Point{0.0, 0.0}, Point{3.0, 4.0})) == Catch::Approx(18.0));
}
