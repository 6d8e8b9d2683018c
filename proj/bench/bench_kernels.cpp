// Copyright 2026 The protovote Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts.
// Thread count comes from PROTOVOTE_THREADS (default: OpenMP's choice).

#include "protovote/kernels.hpp"
#include "protovote/rng.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>

namespace {

using namespace protovote;

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.normal();
    return x;
}

struct SplitInput {
    Eigen::MatrixXd x;
    std::vector<std::vector<std::uint32_t>> sorted;
    std::vector<double> grad;
    std::vector<double> hess;
};

SplitInput split_input(Eigen::Index n, Eigen::Index d) {
    SplitInput s{gaussian(n, d, 2), {}, std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
    Rng rng(3);
    for (std::size_t i = 0; i < s.grad.size(); ++i) {
        s.grad[i] = rng.normal();
        s.hess[i] = 0.1 + rng.uniform();
    }
    s.sorted.resize(static_cast<std::size_t>(d));
    for (Eigen::Index f = 0; f < d; ++f) {
        auto& rows = s.sorted[static_cast<std::size_t>(f)];
        rows.resize(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), 0U);
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return s.x(a, f) < s.x(b, f); });
    }
    return s;
}

template <bool Parallel>
void BM_ColumnMoments(benchmark::State& state) {
    const Eigen::MatrixXd x = gaussian(state.range(0), 2000, 1);
    for (auto _ : state) {
        auto m = Parallel ? kernels::column_moments_parallel(x) : kernels::column_moments_serial(x);
        benchmark::DoNotOptimize(m);
    }
    state.SetItemsProcessed(state.iterations() * x.size());
}

template <bool Parallel>
void BM_BestSplit(benchmark::State& state) {
    const SplitInput in = split_input(state.range(0), 64);
    const kernels::SplitParams params{1.0, 0.0, 1e-3};
    for (auto _ : state) {
        auto s = Parallel ? kernels::best_split_parallel(in.x, in.sorted, in.grad, in.hess, params)
                          : kernels::best_split_serial(in.x, in.sorted, in.grad, in.hess, params);
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations() * in.x.size());
}

template <bool Parallel>
void BM_ArgmaxRows(benchmark::State& state) {
    const Eigen::MatrixXd s = gaussian(state.range(0), 8, 4);
    for (auto _ : state) {
        auto v = Parallel ? kernels::argmax_rows_parallel(s) : kernels::argmax_rows_serial(s);
        benchmark::DoNotOptimize(v);
    }
    state.SetItemsProcessed(state.iterations() * s.rows());
}

template <bool Parallel>
void BM_ClipRows(benchmark::State& state) {
    const Eigen::MatrixXd base = gaussian(state.range(0), 256, 5);
    Eigen::MatrixXd x = base;
    for (auto _ : state) {
        state.PauseTiming();
        x = base;
        state.ResumeTiming();
        if (Parallel) kernels::clip_rows_to_ball_parallel(x, 1.0);
        else kernels::clip_rows_to_ball_serial(x, 1.0);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * x.rows());
}

template <bool Parallel>
void BM_HardVote(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(6);
    std::vector<int> a(n);
    std::vector<int> b(n);
    std::vector<int> c(n);
    Eigen::MatrixXd post(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = static_cast<int>(rng.below(4));
        b[i] = static_cast<int>(rng.below(4));
        c[i] = static_cast<int>(rng.below(4));
        for (int k = 0; k < 4; ++k) post(static_cast<Eigen::Index>(i), k) = rng.uniform();
    }
    for (auto _ : state) {
        auto v = Parallel ? kernels::hard_vote_parallel(a, b, c, post) : kernels::hard_vote_serial(a, b, c, post);
        benchmark::DoNotOptimize(v);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

BENCHMARK(BM_ColumnMoments<false>)->Name("column_moments/serial")->UseRealTime()->Arg(256)->Arg(1024);
BENCHMARK(BM_ColumnMoments<true>)->Name("column_moments/omp")->UseRealTime()->Arg(256)->Arg(1024);
BENCHMARK(BM_BestSplit<false>)->Name("best_split/serial")->UseRealTime()->Arg(1000)->Arg(10000);
BENCHMARK(BM_BestSplit<true>)->Name("best_split/omp")->UseRealTime()->Arg(1000)->Arg(10000);
BENCHMARK(BM_ArgmaxRows<false>)->Name("argmax_rows/serial")->UseRealTime()->Arg(100000);
BENCHMARK(BM_ArgmaxRows<true>)->Name("argmax_rows/omp")->UseRealTime()->Arg(100000);
BENCHMARK(BM_ClipRows<false>)->Name("clip_rows/serial")->UseRealTime()->Arg(20000);
BENCHMARK(BM_ClipRows<true>)->Name("clip_rows/omp")->UseRealTime()->Arg(20000);
BENCHMARK(BM_HardVote<false>)->Name("hard_vote/serial")->UseRealTime()->Arg(200000);
BENCHMARK(BM_HardVote<true>)->Name("hard_vote/omp")->UseRealTime()->Arg(200000);

}  // namespace

BENCHMARK_MAIN();
