#include "config.hpp"
#include "csv.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace epigen::app;
using nlohmann::json;

namespace
{

std::vector<std::string> problems_of(const json& j)
{
    try {
        parse_config(j);
    }
    catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& text)
{
    for (const auto& p : problems) {
        if (p.find(text) != std::string::npos) {
            return true;
        }
    }
    return false;
}

} // namespace

TEST(Config, MinimalDocumentUsesDefaults)
{
    const auto c = parse_config(json::object());
    EXPECT_EQ(c.model.type, "sir");
    EXPECT_DOUBLE_EQ(c.i0, 0.01);
    EXPECT_EQ(c.population, 50000u);
    EXPECT_NO_THROW(c.build_model());
}

TEST(Config, ContactAboveOneIsRejected)
{
    const auto p = problems_of(json{{"contact", {{"type", "constant"}, {"value", 1.2}}}});
    EXPECT_TRUE(mentions(p, "contact rate outside [0,1]"));
}

TEST(Config, ZeroInitialFractionIsRejected)
{
    EXPECT_TRUE(mentions(problems_of(json{{"i0", 0.0}}), "I0 in (0,1) required"));
    EXPECT_TRUE(mentions(problems_of(json{{"i0", 1.0}}), "I0 in (0,1) required"));
}

TEST(Config, UnknownKeysAreRejected)
{
    EXPECT_TRUE(mentions(problems_of(json{{"horizn", 3.0}}), "unknown key: horizn"));
    EXPECT_TRUE(mentions(problems_of(json{{"model", {{"bta", 1.0}}}}), "unknown key: model.bta"));
}

TEST(Config, AllProblemsAreReported)
{
    const auto p = problems_of(json{{"i0", -1.0}, {"dt", 0.0}, {"contact", {{"value", 2.0}}}, {"extra", 1}});
    EXPECT_GE(p.size(), 4u);
    EXPECT_TRUE(mentions(p, "I0"));
    EXPECT_TRUE(mentions(p, "dt"));
    EXPECT_TRUE(mentions(p, "contact rate"));
    EXPECT_TRUE(mentions(p, "extra"));
}

TEST(Config, EmitParseRoundTrip)
{
    json j{{"model", {{"type", "seir"}, {"beta", 2.0}, {"lambda", 3.0}, {"gamma", 1.0}}},
           {"contact", {{"type", "piecewise_constant"}, {"breakpoints", {4.0, 8.0}}, {"values", {1.0, 0.3, 0.8}}}},
           {"i0", 0.02},
           {"seed", 77}};
    const auto a = parse_config(j);
    const auto b = parse_config(emit_config(a));
    EXPECT_TRUE(a == b);
    EXPECT_EQ(config_digest(a), config_digest(b));
}

TEST(Config, DigestIgnoresKeyOrderAndTracksValues)
{
    const auto a = parse_config(json::parse(R"({"i0": 0.02, "horizon": 10})"));
    const auto b = parse_config(json::parse(R"({"horizon": 10, "i0": 0.02})"));
    const auto c = parse_config(json::parse(R"({"horizon": 10, "i0": 0.03})"));
    EXPECT_EQ(config_digest(a), config_digest(b));
    EXPECT_NE(config_digest(a), config_digest(c));
    EXPECT_EQ(config_digest(a).size(), 16u);
    auto moved   = a;
    moved.output = "elsewhere";
    EXPECT_EQ(config_digest(a), config_digest(moved));
}

TEST(Config, OverridesSetNestedKeys)
{
    json j = json::object();
    apply_override(j, "contact.value=0.5");
    apply_override(j, "output=runs");
    const auto c = parse_config(j);
    EXPECT_DOUBLE_EQ(c.contact.value, 0.5);
    EXPECT_EQ(c.output, "runs");
    EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
}

TEST(Csv, RoundTripIsBitExact)
{
    const auto path = std::filesystem::temp_directory_path() / "epigen_csv_roundtrip.csv";
    const std::vector<std::vector<double>> rows{{0.1, 1.0 / 3.0, 1e-300}, {-2.5e17, 0.0, 6.02214076e23}};
    write_csv(path.string(), "00ff00ff00ff00ff", {"a", "b", "c"}, rows);
    std::string digest;
    std::vector<std::string> header;
    const auto back = read_csv(path.string(), &digest, &header);
    std::filesystem::remove(path);
    EXPECT_EQ(digest, "00ff00ff00ff00ff");
    EXPECT_EQ(header, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            EXPECT_EQ(back[i][j], rows[i][j]);
        }
    }
}

TEST(Csv, DigestLineComesFirst)
{
    std::ostringstream out;
    write_csv(out, "abc", {"t", "b"}, {{0.0, 1.0}});
    EXPECT_EQ(out.str().rfind("# config_digest=abc\nt,b\n", 0), 0u);
}
