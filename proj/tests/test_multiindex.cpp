#include "doctest.h"

#include <functional>
#include <random>

#include "stochsym/errors.hpp"
#include "stochsym/multiindex.hpp"

using namespace stochsym;

namespace {

// Interleavings by choosing, letter by letter, which word advances next.
IndexMultiset brute_shuffle(const std::vector<MultiIndex>& words)
{
    IndexMultiset out;
    const int m = words.front().m();
    std::vector<std::size_t> pos(words.size(), 0);
    std::vector<int> current;
    std::size_t total = 0;
    for (const auto& w : words)
        total += w.length();
    std::function<void()> rec = [&] {
        if (current.size() == total) {
            out.add(MultiIndex(current, m));
            return;
        }
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (pos[i] == words[i].length())
                continue;
            current.push_back(words[i][pos[i]]);
            ++pos[i];
            rec();
            --pos[i];
            current.pop_back();
        }
    };
    rec();
    return out;
}

std::int64_t multinomial(const std::vector<MultiIndex>& words)
{
    std::int64_t r = 1;
    std::int64_t n = 0;
    for (const auto& w : words) {
        for (std::size_t i = 1; i <= w.length(); ++i) {
            ++n;
            r = r * n / static_cast<std::int64_t>(i);
        }
    }
    return r;
}

MultiIndex random_word(std::mt19937& g, int m, std::size_t len)
{
    std::uniform_int_distribution<int> letter(0, m);
    std::vector<int> e(len);
    for (auto& x : e)
        x = letter(g);
    return {e, m};
}

} // namespace

TEST_SUITE("multiindex") {

TEST_CASE("parse and print")
{
    const auto a = MultiIndex::parse("(0, 1,1)", 1);
    CHECK(a.str() == "(0,1,1)");
    CHECK(a.length() == 3);
    CHECK(a.zero_count() == 1);
    CHECK(a.back() == 1);
    CHECK(a.drop_last() == MultiIndex({0, 1}, 1));
    CHECK(MultiIndex::parse("()", 2).empty());
    CHECK(MultiIndex::zeros(3, 1).str() == "(0,0,0)");
    CHECK(MultiIndex({1}, 2).concat(MultiIndex({0, 2}, 2)).str() == "(1,0,2)");
}

TEST_CASE("bad indices are rejected")
{
    CHECK_THROWS_AS(MultiIndex({3}, 2), DomainError);
    CHECK_THROWS_AS(MultiIndex({-1}, 2), DomainError);
    CHECK_THROWS_AS(MultiIndex::parse("(0,1", 1), ParseError);
    CHECK_THROWS_AS(MultiIndex::parse("0,1)", 1), ParseError);
    CHECK_THROWS_AS(MultiIndex().back(), DomainError);
    CHECK_THROWS_AS(lambda_pair(MultiIndex(), MultiIndex({1}, 1)), DomainError);
    CHECK_THROWS_AS(lambda_pair(MultiIndex({1}, 1), MultiIndex({1}, 2)), DomainError);
}

TEST_CASE("graded order and enumeration")
{
    const auto all = all_indices(2, 3);
    CHECK(all.size() == 3 + 9 + 27);
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK(GradedLess{}(all[i - 1], all[i]));
    CHECK(all.front().str() == "(0)");
    CHECK(all.back().str() == "(2,2,2)");
}

TEST_CASE("two-letter base case")
{
    const auto l = lambda_pair(MultiIndex({0}, 1), MultiIndex({1}, 1));
    CHECK(l.total() == 2);
    CHECK(l.multiplicity(MultiIndex({0, 1}, 1)) == 1);
    CHECK(l.multiplicity(MultiIndex({1, 0}, 1)) == 1);
    const auto same = lambda_pair(MultiIndex({1}, 1), MultiIndex({1}, 1));
    CHECK(same.multiplicity(MultiIndex({1, 1}, 1)) == 2);
}

TEST_CASE("lambda_pair equals brute-force shuffles")
{
    std::mt19937 g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t l1 = 1 + g() % 4;
        const std::size_t l2 = 1 + g() % 4;
        const auto a = random_word(g, 2, l1);
        const auto b = random_word(g, 2, l2);
        const auto got = lambda_pair(a, b);
        CHECK(got == brute_shuffle({a, b}));
        CHECK(got.total() == multinomial({a, b}));
        CHECK(got == lambda_pair(b, a));
    }
}

TEST_CASE("lambda_multi equals brute-force shuffles")
{
    std::mt19937 g(12);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<MultiIndex> words;
        for (int i = 0; i < 3; ++i)
            words.push_back(random_word(g, 2, 1 + g() % 2));
        const auto got = lambda_multi(words);
        CHECK(got == brute_shuffle(words));
        CHECK(got == shuffle_oracle(words));
        CHECK(got.total() == multinomial(words));
    }
}

TEST_CASE("tau counts")
{
    const MultiIndex a({1}, 1);
    CHECK(tau_count(a, 0, a) == 1);
    CHECK(tau_count(MultiIndex({1, 1}, 1), 0, a) == 0);
    CHECK(tau_count(MultiIndex({0, 1}, 1), 1, a) == 1);
    CHECK(tau_count(MultiIndex({0, 0}, 1), 1, MultiIndex({0}, 1)) == 2);
    CHECK(tau_count(MultiIndex({0, 0, 1}, 1), 2, a) == 1);
    CHECK(tau_count(MultiIndex({0, 1, 1}, 1), 1, MultiIndex({1, 1}, 1)) == 1);
    CHECK(tau_count(MultiIndex({1, 1}, 1), 0, MultiIndex({1, 1}, 1)) == 1);
    std::mt19937 g(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto alpha = random_word(g, 2, 1 + g() % 3);
        const int k = 1 + static_cast<int>(g() % 2);
        const auto shuffles = brute_shuffle({MultiIndex::zeros(k, 2), alpha});
        for (const auto& [beta, count] : shuffles)
            CHECK(tau_count(beta, k, alpha) == count);
    }
}

TEST_CASE("shuffle oracle cap")
{
    const std::vector<MultiIndex> big{MultiIndex::zeros(6, 1), MultiIndex::zeros(6, 1)};
    CHECK_THROWS_AS(shuffle_oracle(big), CapExceeded);
}

}
