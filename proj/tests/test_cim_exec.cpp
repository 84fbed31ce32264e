#include "pimhe/cim/hom.hpp"

#include "pimhe/cim/compiler.hpp"
#include "pimhe/cim/executor.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>

using namespace pimhe;
using namespace pimhe::cim;
using testutil::random_poly;

namespace {

BankGeometry exec_geo(unsigned word_bits = 128, std::uint32_t arrays = 16, std::uint32_t rows = 64) {
    BankGeometry g;
    g.num_arrays = arrays;
    g.rows_M = rows;
    g.data_rows_Mprime = 4;
    g.cols_N = word_bits * 4;
    g.word_bits = word_bits;
    return g;
}

struct TestRig {
    BankGeometry geo;
    CimBank bank;
    CostModel cost;
    ScratchAllocator alloc;  // shared between host staging and the compiler
    StepProgram program;

    explicit TestRig(const BankGeometry& g)
        : geo(g), bank(g), alloc(g, ProgramBuilder::first_pool_row(g)) {}

    /// Compile with `fn(builder)` and execute the materialized program.
    template <class Fn>
    StepTrace run(unsigned k, Fn&& fn, bool record = true) {
        program = StepProgram{};
        ProgramCollector col(program);
        const std::uint64_t mark = alloc.mark();
        ProgramBuilder pb(geo, col, program.pool, k, &alloc);
        fn(pb);
        alloc.release(mark);
        Executor ex(bank, cost, record);
        ex.run(program);
        return std::move(ex.trace);
    }
};

AddrVec host_vec(CimBank& bank, ScratchAllocator& al, const std::vector<BigInt>& vals, unsigned width) {
    AddrVec v = al.alloc(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) bank.write_slot(v[i], mod_pow2(vals[i], width));
    return v;
}

std::vector<BigInt> read_vec(CimBank& bank, AddrSpan v, unsigned k) {
    std::vector<BigInt> out;
    for (const auto& at : v) out.push_back(bank.read_slot_centered(at, k));
    return out;
}

}  // namespace

TEST_CASE("compiled centered reduction agrees with the oracle on the worked cases") {
    const unsigned k = 4;
    TestRig rig(exec_geo(64));
    for (long x : {8L, 5L, 0L, 13L, 15L, 7L, -9L, -8L}) {
        AddrVec v = rig.alloc.alloc(1);
        rig.bank.write_slot(v[0], mod_pow2(BigInt(x), 64));
        rig.run(k, [&](ProgramBuilder& pb) { compile_mod_reduce(pb, v); });
        CHECK(rig.bank.read_slot_centered(v[0], k) == reduce_centered(BigInt(x), k));
        // the slot pattern is the sign-extended centered value
        CHECK(rig.bank.read_slot(v[0]) == mod_pow2(reduce_centered(BigInt(x), k), 64));
    }
}

TEST_CASE("compiled centered reduction on random inputs, flag soundness included") {
    const unsigned k = 9;
    TestRig rig(exec_geo(64));
    PrfStream g("exec", "modred");
    AddrVec v = rig.alloc.alloc(48);
    std::vector<BigInt> raw;
    for (std::size_t i = 0; i < v.size(); ++i) {
        BigInt x = g.next_bits(k + 5);
        if (g.next_range(0, 1)) x = -x;
        raw.push_back(x);
        rig.bank.write_slot(v[i], mod_pow2(x, 64));
    }
    auto tr = rig.run(k, [&](ProgramBuilder& pb) { compile_mod_reduce(pb, v); });
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(rig.bank.read_slot_centered(v[i], k) == reduce_centered(raw[i], k));
    // flag soundness: the conditional subtraction ran iff the canonical
    // residue was >= 2^(k-1)
    std::size_t expect_subs = 0;
    for (const auto& x : raw)
        if (mod_pow2(x, k) >= pow2(k - 1)) ++expect_subs;
    std::size_t pred_adds = 0;
    for (const auto& r : tr.records)
        if (r.step.kind == StepKind::WordAdd && (r.step.flags & step_flags::kPredFlag) && r.executed)
            ++pred_adds;
    CHECK(pred_adds == expect_subs);
}

TEST_CASE("compiled polynomial add/sub match the ring oracles") {
    const unsigned k = 16, n = 8;
    TestRig rig(exec_geo(64));
    PrfStream g("exec", "addsub");
    for (int trial = 0; trial < 25; ++trial) {
        auto pa = random_poly(k, n, g);
        auto pb_ = random_poly(k, n, g);
        AddrVec va = host_vec(rig.bank, rig.alloc, pa.coeffs, 64);
        AddrVec vb = host_vec(rig.bank, rig.alloc, pb_.coeffs, 64);
        AddrVec vs = rig.alloc.alloc(n), vd = rig.alloc.alloc(n);
        rig.run(k, [&](ProgramBuilder& b) {
            compile_poly_add(b, va, vb, vs);
            compile_poly_sub(b, va, vb, vd);
        });
        CHECK(read_vec(rig.bank, vs, k) == poly_add(pa, pb_).coeffs);
        CHECK(read_vec(rig.bank, vd, k) == poly_sub(pa, pb_).coeffs);
    }
}

TEST_CASE("compiled subtraction exercises the two's-complement carry path") {
    const unsigned k = 4;
    TestRig rig(exec_geo(64));
    AddrVec va = host_vec(rig.bank, rig.alloc, {BigInt(0)}, 64);
    AddrVec vb = host_vec(rig.bank, rig.alloc, {BigInt(1)}, 64);
    AddrVec vo = rig.alloc.alloc(1);
    rig.run(k, [&](ProgramBuilder& b) { compile_poly_sub(b, va, vb, vo); });
    CHECK(rig.bank.read_slot_centered(vo[0], k) == -1);
}

TEST_CASE("compiled rounded scaling matches poly_scale_round, ties included") {
    const unsigned k = 12, n = 16;
    TestRig rig(exec_geo(64));
    PrfStream g("exec", "scale");
    for (unsigned kp : {0u, 1u, 3u, 7u, 11u, 12u}) {
        auto p = random_poly(k, n, g);
        p.coeffs[0] = reduce_centered(BigInt(14), k);  // remainder exactly half: rounds up
        p.coeffs[1] = reduce_centered(BigInt(13), k);
        AddrVec v = host_vec(rig.bank, rig.alloc, p.coeffs, 64);
        rig.run(k, [&](ProgramBuilder& b) { compile_poly_scale(b, v, kp); });
        CHECK(read_vec(rig.bank, v, k) == poly_scale_round(p, kp).coeffs);
    }
}

TEST_CASE("scaling by 2^127 compiles to exactly three shift rounds of 117+5+5") {
    const unsigned k = 128;
    BankGeometry g = exec_geo(192);
    TestRig rig(g);
    AddrVec v = host_vec(rig.bank, rig.alloc, {pow2(120) + 12345}, 192);
    rig.run(k, [&](ProgramBuilder& b) { b.vec_scale_round(v, 127, k); });
    std::vector<int> shifts;
    for (const auto& r : rig.program.steps)
        if (r.kind == StepKind::LogShift)
            shifts.push_back(-ShiftMask::decode(static_cast<std::uint16_t>(r.imm)).net_shift());
    REQUIRE(shifts.size() == 3);
    CHECK(shifts[0] == 117);
    CHECK(shifts[1] == 5);
    CHECK(shifts[2] == 5);
    CHECK(rig.bank.read_slot(v[0]) == scale_pattern(pow2(120) + 12345, 127, k));
}

TEST_CASE("signed base-case products via flag-predicated negation") {
    const unsigned k = 14;
    TestRig rig(exec_geo(64));
    PrfStream g("exec", "signed-leaf");
    for (int trial = 0; trial < 60; ++trial) {
        BigInt a = reduce_centered(g.next_bits(k), k);
        BigInt b = reduce_centered(g.next_bits(k), k);
        AddrVec va = host_vec(rig.bank, rig.alloc, {a}, 64);
        AddrVec vb = host_vec(rig.bank, rig.alloc, {b}, 64);
        AddrVec vo = rig.alloc.alloc(1);
        rig.run(k, [&](ProgramBuilder& pb) {
            ProgramBuilder::LeafJob j;
            j.a = va[0];
            j.b = vb[0];
            j.dst = vo[0];
            j.width = k;
            j.signed_operands = true;
            pb.shift_add_products({j});
        });
        CHECK(rig.bank.read_slot(vo[0]) == mod_pow2(a * b, 64));
    }
}

TEST_CASE("toy integer Karatsuba replays the published intermediates") {
    const unsigned k = 8;
    TestRig rig(exec_geo(64));
    AddrVec va = host_vec(rig.bank, rig.alloc, {BigInt(11)}, 64);
    AddrVec vb = host_vec(rig.bank, rig.alloc, {BigInt(6)}, 64);
    AddrVec vo = rig.alloc.alloc(1);

    rig.program = StepProgram{};
    ProgramCollector col(rig.program);
    ProgramBuilder pb(rig.geo, col, rig.program.pool, k, &rig.alloc);
    pb.karatsuba_int(va[0], vb[0], 4, 4, 2, vo[0], &rig.program.landmarks);
    std::sort(rig.program.landmarks.begin(), rig.program.landmarks.end(),
              [](const Landmark& x, const Landmark& y) { return x.step_index < y.step_index; });

    Executor ex(rig.bank, rig.cost, true);
    ex.run(rig.program);

    auto find = [&](const std::string& label) -> BigInt {
        for (const auto& [l, v] : ex.trace.landmark_values)
            if (l == label) return v;
        FAIL("missing landmark ", label);
        return 0;
    };
    CHECK(find("R1") == 15);       // 1111
    CHECK(find("R2") == 2);        // 10
    CHECK(find("R3") == 6);        // 0110
    CHECK(find("R1-R2-R3") == 7);  // 0111
    CHECK(find("product") == 66);  // 1000010
    CHECK(rig.bank.read_slot(vo[0]) == 66);
}

TEST_CASE("compiled ring multiplication equals the Karatsuba/schoolbook oracle") {
    PrfStream g("exec", "polymult");
    for (unsigned n : {1u, 2u, 4u, 8u}) {
        for (unsigned k : {8u, 16u}) {
            BankGeometry geo = exec_geo(128, 16, 96);
            TestRig rig(geo);
                    for (int trial = 0; trial < 6; ++trial) {
                auto pa = random_poly(k, n, g);
                auto pb_ = random_poly(k, n, g);
                AddrVec va = host_vec(rig.bank, rig.alloc, pa.coeffs, 128);
                AddrVec vb = host_vec(rig.bank, rig.alloc, pb_.coeffs, 128);
                AddrVec vo = rig.alloc.alloc(n);
                rig.run(k, [&](ProgramBuilder& b) { compile_poly_mult(b, va, vb, vo); });
                if (n == 1) {
                    CHECK(read_vec(rig.bank, vo, k)[0] == reduce_centered(pa.coeffs[0] * pb_.coeffs[0], k));
                } else {
                    CHECK(read_vec(rig.bank, vo, k) == poly_mult_schoolbook(pa, pb_).coeffs);
                }
            }
        }
    }
}

TEST_CASE("n=1 ring multiplication compiles to a pure shift-add program") {
    BankGeometry geo = exec_geo(128, 16, 96);
    TestRig rig(geo);
    AddrVec va = host_vec(rig.bank, rig.alloc, {BigInt(9)}, 128);
    AddrVec vb = host_vec(rig.bank, rig.alloc, {BigInt(5)}, 128);
    AddrVec vo = rig.alloc.alloc(1);
    rig.run(8, [&](ProgramBuilder& b) {
        ProgramBuilder::KaraTask t;
        t.a = va;
        t.b = vb;
        t.out = vo;
        t.width_a = 8;
        t.width_b = 8;
        b.kara_batch({t});
    });
    CHECK(rig.bank.read_slot(vo[0]) == 45);
    // nothing but base-case machinery: no polynomial-level recursion scratch
    bool has_add_wave = false;
    for (const auto& s : rig.program.steps) has_add_wave |= (s.kind == StepKind::WordAdd);
    CHECK(has_add_wave);
}

TEST_CASE("streaming execution equals materialized execution, including costs") {
    const unsigned k = 16, n = 8;
    BankGeometry geo = exec_geo(128, 16, 96);
    PrfStream g("exec", "stream-eq");
    auto pa = random_poly(k, n, g);
    auto pb_ = random_poly(k, n, g);

    CimBank bank1(geo), bank2(geo);
    CostModel cm;
    ScratchAllocator a1(geo, ProgramBuilder::first_pool_row(geo));
    ScratchAllocator a2(geo, ProgramBuilder::first_pool_row(geo));
    AddrVec va1 = host_vec(bank1, a1, pa.coeffs, 128), vb1 = host_vec(bank1, a1, pb_.coeffs, 128);
    AddrVec vo1 = a1.alloc(n);
    AddrVec va2 = host_vec(bank2, a2, pa.coeffs, 128), vb2 = host_vec(bank2, a2, pb_.coeffs, 128);
    AddrVec vo2 = a2.alloc(n);

    StepProgram prog;  // materialized, fully recorded
    ProgramCollector col(prog);
    ProgramBuilder pbm(geo, col, prog.pool, k, &a1);
    compile_poly_mult(pbm, va1, vb1, vo1);
    Executor exm(bank1, cm, true);
    exm.run(prog);

    Executor exs(bank2, cm, false);  // streaming with the fused leaf path
    ConstPool pool2;
    exs.pool = &pool2;
    ProgramBuilder pbs(geo, exs, pool2, k, &a2);
    compile_poly_mult(pbs, va2, vb2, vo2);

    CHECK(read_vec(bank1, vo1, k) == read_vec(bank2, vo2, k));
    CHECK(exm.trace.total_cycles() == exs.trace.total_cycles());
    CHECK(exm.trace.total_energy_milli() == exs.trace.total_energy_milli());
    for (std::size_t i = 0; i < kStepKindCount; ++i) {
        CHECK(exm.trace.steps_by_kind[i] == exs.trace.steps_by_kind[i]);
        CHECK(exm.trace.waves_by_kind[i] == exs.trace.waves_by_kind[i]);
    }
}

TEST_CASE("layout: published capacity figures at the default geometry") {
    BankGeometry g;  // 4096 arrays of 8x1024, 2 scratch rows
    ParamSet p = preset("seal-128");
    auto plan = plan_layout(6, g, p);
    CHECK(plan.arrays_per_poly == 2048);
    CHECK(plan.capacity() == 6);  // six resident ciphertexts per 4 MB bank

    // operand coefficients of equal degree are column-aligned across rows
    auto plan2 = plan_layout(2, g, p);
    std::size_t aligned_pairs = 0;
    for (unsigned z = 0; z < p.n; ++z) {
        Addr x = plan2.coeff_addr(0, 0, z);
        Addr y = plan2.coeff_addr(1, 0, z);
        REQUIRE(x.array == y.array);
        REQUIRE(x.slot == y.slot);
        REQUIRE(x.row != y.row);
        ++aligned_pairs;
    }
    CHECK(aligned_pairs == 8192);
    // c[0] and c[1] occupy disjoint array ranges (the n1 split)
    CHECK(plan2.coeff_addr(0, 1, 0).array == 2048);

    CHECK_THROWS_AS(plan_layout(7, g, p), CapacityError);
    try {
        plan_layout(7, g, p);
    } catch (const CapacityError& e) {
        CHECK(e.available == 6);
        CHECK(e.required == 7);
    }
}

TEST_CASE("layout rejects geometries whose slots are narrower than k") {
    BankGeometry g;
    g.word_bits = 128;  // k = 218 does not fit
    ParamSet p = preset("seal-128");
    CHECK_THROWS(plan_layout(1, g, p));
}

TEST_CASE("multiplication on a scratch-starved geometry reports required rows") {
    BankGeometry g;  // default: only 2 scratch rows, no stations
    ParamSet p = preset("desk-16");
    StepProgram prog;
    ProgramCollector col(prog);
    ProgramBuilder pb(g, col, prog.pool, p.k);
    ProgramBuilder::LeafJob j;
    j.a = j.b = j.dst = Addr{0, 0, 0};
    j.width = 4;
    CHECK_THROWS_AS(pb.shift_add_products({j}), CapacityError);
}
