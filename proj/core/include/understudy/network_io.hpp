#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "understudy/bayes_net.hpp"

namespace understudy {

/// Network file: {"variables":[{"name","states"}], "edges":[[p,c]],
/// "cpts":[{"variable","parents","rows"}]}.
DiscreteBayesNet parse_network(const std::string& json_text);
DiscreteBayesNet load_network(const std::filesystem::path& path);
std::string network_to_json(const DiscreteBayesNet& net);
void save_network(const DiscreteBayesNet& net, const std::filesystem::path& path);

/// Dataset CSV: header of variable names in declaration order, cells are
/// state labels. Reading accepts any column order as long as every
/// variable appears exactly once.
void write_dataset_csv(const Dag& dag, const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(const Dag& dag, std::istream& in);
void save_dataset(const Dag& dag, const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const Dag& dag, const std::filesystem::path& path);

/// Reads a whole file; throws std::runtime_error on failure.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace understudy
