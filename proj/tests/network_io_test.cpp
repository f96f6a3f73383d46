#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "test_support.hpp"
#include "understudy/network_io.hpp"

namespace {

using namespace understudy;

TEST(NetworkFile, RoundTripsThroughJson) {
  const auto net = testing_support::asia();
  const auto again = parse_network(network_to_json(net));
  ASSERT_EQ(again.size(), net.size());
  EXPECT_EQ(again.dag().edges(), net.dag().edges());
  for (std::size_t i = 0; i < net.size(); ++i) {
    EXPECT_EQ(again.cpt(i).table, net.cpt(i).table);
    EXPECT_EQ(again.cpt(i).parents, net.cpt(i).parents);
  }
}

TEST(NetworkFile, RejectsMalformedDocuments) {
  EXPECT_ANY_THROW(parse_network("{"));
  EXPECT_ANY_THROW(parse_network(R"({"variables": []})"));
  EXPECT_THROW(parse_network(R"({
    "variables": [{"name": "A", "states": ["0", "1"]}],
    "edges": [],
    "cpts": [{"variable": "A", "parents": [], "rows": [[0.2, 0.2]]}]})"),
               NetworkError);
}

TEST(DatasetCsv, RoundTripsAndAcceptsAnyColumnOrder) {
  const auto net = testing_support::asia();
  const auto data = forward_sample(net, 1, 50);
  std::stringstream buffer;
  write_dataset_csv(net.dag(), data, buffer);
  std::istringstream in(buffer.str());
  EXPECT_EQ(read_dataset_csv(net.dag(), in).records, data.records);

  std::istringstream shuffled(
      "dysp,xray,bronc,lung,smoke,tub,asia\n"
      "no,yes,no,yes,yes,no,no\n");
  const auto one = read_dataset_csv(net.dag(), shuffled);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.records[0], (Assignment{1, 1, 0, 0, 1, 0, 1}));
}

TEST(DatasetCsv, RejectsUnknownStatesAndMissingColumns) {
  const auto net = testing_support::asia();
  std::istringstream bad_state("asia,tub,smoke,lung,bronc,xray,dysp\nyes,no,maybe,no,no,no,no\n");
  EXPECT_ANY_THROW(read_dataset_csv(net.dag(), bad_state));
  std::istringstream missing("asia,tub\nyes,no\n");
  EXPECT_ANY_THROW(read_dataset_csv(net.dag(), missing));
}

TEST(DatasetCsv, FileHelpersCreateDirectories) {
  const auto net = testing_support::asia();
  const auto dir = std::filesystem::temp_directory_path() / "understudy_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const auto data = forward_sample(net, 2, 10);
  save_dataset(net.dag(), data, dir / "d.csv");
  EXPECT_EQ(load_dataset(net.dag(), dir / "d.csv").records, data.records);
  EXPECT_THROW(read_text_file(dir / "absent.txt"), std::runtime_error);
  std::filesystem::remove_all(dir.parent_path());
}

}  // namespace
