#include <gtest/gtest.h>

#include <filesystem>

#include "bnet/instance_io.hpp"

using namespace bnet;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_problem(text);
  } catch (const InstanceError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(InstanceIo, McndRoundTrip) {
  const Problem p = generate_mcnd({}, 4);
  const auto back = parse_problem(to_json(p).dump());
  EXPECT_EQ(to_json(back).dump(), to_json(p).dump());
}

TEST(InstanceIo, GapRoundTripThroughFile) {
  const Problem p = generate_gap({}, 4);
  const auto path = std::filesystem::temp_directory_path() / "bnet_io_gap.json";
  save_problem(p, path.string());
  const auto back = load_problem(path.string());
  EXPECT_EQ(to_json(back).dump(), to_json(p).dump());
  std::filesystem::remove(path);
}

TEST(InstanceIo, SchemaFieldNames) {
  const auto j = to_json(Problem(generate_mcnd({3, 3, 1}, 0)));
  EXPECT_EQ(j["type"], "mcnd");
  EXPECT_TRUE(j["arcs"][0].contains("fixed"));
  EXPECT_TRUE(j["arcs"][0].contains("routing"));
  EXPECT_TRUE(j["commodities"][0].contains("dest"));
  EXPECT_EQ(to_json(Problem(generate_gap({3, 2}, 0)))["type"], "gap");
}

TEST(InstanceIo, DiagnosticsNameTheField) {
  EXPECT_NE(error_of(R"({"type":"gap","profits":[[1]],"weights":[[2.5]],"capacities":[3]})")
                .find("weights[0][0]"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"type":"gap","profits":[[1]],"weights":[[0]],"capacities":[3]})")
                .find("weights[0][0]"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"type":"mcnd","nodes":2,"arcs":[{"tail":0,"head":1,"capacity":-1,)"
                     R"("fixed":1,"routing":[1]}],"commodities":[{"origin":0,"dest":1,"volume":1}]})")
                .find("arcs[0].capacity"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"type":"mcnd","nodes":2,"arcs":[{"tail":1,"head":0,"capacity":1,)"
                     R"("fixed":1,"routing":[1]}],"commodities":[{"origin":0,"dest":1,"volume":1}]})")
                .find("commodities[0]"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"type":"knapsack"})").find("type"), std::string::npos);
  EXPECT_NE(error_of("{\n\"type\": \"gap\",\n").find("line"), std::string::npos);
}

TEST(InstanceIo, RejectsDuplicateArcs) {
  const std::string text =
      R"({"type":"mcnd","nodes":2,"arcs":[{"tail":0,"head":1,"capacity":1,"fixed":1,"routing":[1]},)"
      R"({"tail":0,"head":1,"capacity":1,"fixed":1,"routing":[1]}],)"
      R"("commodities":[{"origin":0,"dest":1,"volume":1}]})";
  EXPECT_NE(error_of(text).find("duplicate"), std::string::npos);
}

TEST(InstanceIo, MissingFileIsReported) {
  EXPECT_THROW(load_problem("/nonexistent/instance.json"), std::runtime_error);
}
