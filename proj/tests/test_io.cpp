#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rwld/io.hpp"

using namespace rwld;

namespace {

Field random_field(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field f(g);
  for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values.data()[k] = nd(rng) * 1e3;
  f.values(0, 0) = 1.0 / 3.0;
  f.values(1, 1) = -0.0;
  f.values(2, 2) = 5e-324;
  return f;
}

std::filesystem::path tmp(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "rwld_test_io";
  std::filesystem::create_directories(d);
  return d / name;
}

}  // namespace

TEST(Io, BinaryHeaderLayout) {
  const Grid g(2.5, 17, 1.0, 16);
  std::ostringstream os;
  io::write_binary(os, g, random_field(g, 1).values);
  const std::string s = os.str();
  ASSERT_EQ(s.size(), 80u + 8u * 17u * 18u);
  EXPECT_EQ(s.substr(0, 5), "RWLD1");
  EXPECT_EQ(s[79], '\n');
  EXPECT_EQ(s[5], '{');
  const auto j = nlohmann::json::parse(s.substr(5, 74));
  EXPECT_EQ(j.at("nx").get<int>(), 17);
  EXPECT_EQ(j.at("r").get<int>(), 17);
  EXPECT_EQ(j.at("c").get<int>(), 18);
  EXPECT_DOUBLE_EQ(j.at("L").get<double>(), 2.5);
  // payload is little-endian float64, row-major
  double first;
  std::memcpy(&first, s.data() + 80, 8);
  EXPECT_EQ(first, 1.0 / 3.0);
}

TEST(Io, BinaryRoundTripIsBitwise) {
  const Grid g(2.5, 17, 1.0, 16);
  const Field f = random_field(g, 2);
  io::save(tmp("f.rwld").string(), f);
  const Field back = io::load_field(tmp("f.rwld").string());
  EXPECT_EQ(back.grid, g);
  EXPECT_EQ(std::memcmp(back.values.data(), f.values.data(), sizeof(double) * f.values.size()), 0);
}

TEST(Io, CsvRoundTripIsBitwise) {
  const Grid g(0.1, 9, 0.05, 8);
  const Field f = random_field(g, 3);
  io::save(tmp("f.csv").string(), f, true);
  std::ifstream is(tmp("f.csv"));
  std::string first;
  std::getline(is, first);
  EXPECT_EQ(first.rfind("# rwld {", 0), 0u);
  const Field back = io::load_field(tmp("f.csv").string());
  EXPECT_EQ(back.grid, g);
  EXPECT_EQ(std::memcmp(back.values.data(), f.values.data(), sizeof(double) * f.values.size()), 0);
}

TEST(Io, TypedLoadersCheckShape) {
  const Grid g(2.5, 17, 1.0, 16);
  io::save(tmp("c.rwld").string(), Control(g));
  EXPECT_NO_THROW(io::load_control(tmp("c.rwld").string()));
  EXPECT_THROW(io::load_field(tmp("c.rwld").string()), io::IoError);
  io::save(tmp("gf.rwld").string(), GridFunction(g));
  EXPECT_NO_THROW(io::load_grid_function(tmp("gf.rwld").string()));
  EXPECT_THROW(io::load_noise(tmp("gf.rwld").string()), io::IoError);
}

TEST(Io, RejectsCorruptInput) {
  const Grid g(2.5, 17, 1.0, 16);
  std::ostringstream os;
  io::write_binary(os, g, random_field(g, 4).values);
  std::string s = os.str();
  {
    std::string bad = s;
    bad[0] = 'X';
    std::istringstream is(bad);
    EXPECT_THROW(io::read_binary(is), io::IoError);
  }
  {
    std::istringstream is(s.substr(0, s.size() - 3));
    EXPECT_THROW(io::read_binary(is), io::IoError);
  }
  {
    std::istringstream is(s + "x");
    EXPECT_THROW(io::read_binary(is), io::IoError);
  }
  {
    std::istringstream is("# rwld {\"L\":1,\"T\":1,\"nx\":8,\"nt\":8,\"r\":1,\"c\":9}\n1,2,3\n");
    EXPECT_THROW(io::read_csv(is), io::IoError);
  }
  EXPECT_THROW(io::load(tmp("does_not_exist").string()), io::IoError);
}

TEST(Io, NoiseSpecJsonRoundTrip) {
  const NoiseSpec s{HurstParam(0.37), Grid(3.0, 33, 1.25, 40), 987654321ULL, NoiseMethod::circulant_embedding};
  const nlohmann::json j = io::to_json(s);
  for (const char* k : {"H", "L", "nx", "T", "nt", "seed", "method"}) EXPECT_TRUE(j.contains(k)) << k;
  const NoiseSpec back = io::noise_spec_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.hp.H(), s.hp.H());
  EXPECT_EQ(back.grid, s.grid);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.method, s.method);
  EXPECT_THROW(io::noise_spec_from_json(nlohmann::json{{"H", 0.3}}), ConfigError);
}
