#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(METASURF_BIN) + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("homogenize on the air-only cell hits the analytic coefficients") {
  TempDir dir("cli_homog");
  write_file("cli_homog/cfg.ini",
             "[cell]\nnx = 32\nny = 32\ninclusion = none\n"
             "[output]\ndir = cli_homog/out\n");
  CHECK(run("homogenize -c cli_homog/cfg.ini") == 0);
  const std::string csv = slurp("cli_homog/out/coefficients.csv");
  CHECK(csv.find("iteration,A11,B1,Kinv,F") == 0);
  double a11, b1, kinv, f;
  int it;
  REQUIRE(std::sscanf(csv.c_str(), "iteration,A11,B1,Kinv,F\n%d,%lf,%lf,%lf,%lf", &it,
                      &a11, &b1, &kinv, &f) == 5);
  CHECK(a11 == doctest::Approx(1.0 / 1.2).epsilon(1e-8));
  CHECK(std::abs(b1) < 1e-8);
  CHECK(kinv == doctest::Approx(1.0 / 1.42e5).epsilon(1e-8));
  CHECK(f == doctest::Approx(1.2).epsilon(1e-8));
  CHECK(fs::exists("cli_homog/out/cell.vtk"));
  CHECK(fs::exists("cli_homog/out/manifest.ini"));
}

TEST_CASE("malformed config key exits with the config code and names the key") {
  TempDir dir("cli_badcfg");
  write_file("cli_badcfg/cfg.ini", "[frequency]\nk0_hz = 25\n");
  CHECK(run("homogenize -c cli_badcfg/cfg.ini") == 2);
  CHECK(slurp("cli_stderr.txt").find("k0_hz") != std::string::npos);
}

TEST_CASE("macro-solve writes field and flux artifacts") {
  TempDir dir("cli_macro");
  write_file("cli_macro/cfg.ini",
             "[macro]\nnx = 20\nny = 20\n"
             "[output]\ndir = cli_macro/out\n");
  CHECK(run("macro-solve -c cli_macro/cfg.ini --coeffs 0.466 0.0 5.05e-6 2.18") == 0);
  CHECK(fs::exists("cli_macro/out/field.vtk"));
  const std::string flux = slurp("cli_macro/out/flux.csv");
  CHECK(flux.find("quantity,value") == 0);
  CHECK(flux.find("flux_inlet_w_per_m") != std::string::npos);
  CHECK(flux.find("norm2_outlet2_pa2_m") != std::string::npos);
}

TEST_CASE("rerunning from the manifest reproduces outputs bitwise") {
  TempDir dir("cli_repro");
  write_file("cli_repro/cfg.ini",
             "[cell]\nnx = 24\nny = 24\ninclusion = circle\n"
             "[output]\ndir = cli_repro/out1\n");
  CHECK(run("homogenize -c cli_repro/cfg.ini") == 0);
  CHECK(run("homogenize -c cli_repro/out1/manifest.ini -o cli_repro/out2") == 0);
  CHECK(slurp("cli_repro/out1/coefficients.csv") ==
        slurp("cli_repro/out2/coefficients.csv"));
  CHECK(slurp("cli_repro/out1/cell.vtk") == slurp("cli_repro/out2/cell.vtk"));
}

TEST_CASE("optimize honors the iteration cap and strict flag") {
  TempDir dir("cli_opt");
  write_file("cli_opt/cfg.ini",
             "[cell]\nnx = 24\nny = 24\n"
             "[macro]\nnx = 20\nny = 16\n"
             "[optimizer]\nmax_iterations = 3\nsnapshot_every = 0\n"
             "[output]\ndir = cli_opt/out\n");
  CHECK(run("optimize -c cli_opt/cfg.ini") == 0);
  CHECK(fs::exists("cli_opt/out/history.csv"));
  CHECK(fs::exists("cli_opt/out/phi_final.vtk"));
  CHECK(fs::exists("cli_opt/out/design_final.vtk"));
  // Three iterations cannot satisfy the convergence criterion.
  CHECK(run("optimize -c cli_opt/cfg.ini --strict") == 4);
}

TEST_CASE("missing subcommand or config file fail cleanly") {
  CHECK(run("") != 0);
  CHECK(run("homogenize -c does_not_exist.ini") == 2);
}
