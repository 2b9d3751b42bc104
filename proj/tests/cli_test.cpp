#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "kae/io.hpp"
#include "kae/types.hpp"

using kae::Index;
using kae::Matrix;

namespace {

std::string g_binary;  // path to the kae executable, from argv[1]

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("kae_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI with `args` appended, capturing exit status and both streams.
CmdResult run_cli(const TempDir& tmp, const std::string& args, const std::string& env = "") {
  const std::string out_path = tmp / "_stdout.txt";
  const std::string err_path = tmp / "_stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + g_binary + "' " + args + " > '" +
                          out_path + "' 2> '" + err_path + "'";
  const int rc = std::system(cmd.c_str());
  CmdResult result;
  result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

bool single_error_line(const std::string& err) {
  if (err.rfind("error: ", 0) != 0) return false;
  const std::size_t nl = err.find('\n');
  return nl == err.size() - 1;  // exactly one trailing newline
}

}  // namespace

TEST_CASE("help and bad invocations") {
  TempDir tmp;
  const CmdResult help = run_cli(tmp, "--help");
  CHECK(help.status == 0);
  CHECK(help.out.find("gen-data") != std::string::npos);
  CHECK(help.out.find("fit") != std::string::npos);
  CHECK(help.out.find("kpca") != std::string::npos);

  const CmdResult bare = run_cli(tmp, "");
  CHECK(bare.status == 1);
  CHECK(single_error_line(bare.err));

  const CmdResult unknown = run_cli(tmp, "frobnicate");
  CHECK(unknown.status == 1);
  CHECK(single_error_line(unknown.err));

  const CmdResult badflag = run_cli(tmp, "fit --no-such-flag");
  CHECK(badflag.status == 1);
  CHECK(single_error_line(badflag.err));
}

TEST_CASE("gen-data writes points and labels") {
  TempDir tmp;
  const CmdResult gen = run_cli(tmp, "gen-data --kind circles --n 20 --clusters 2 --noise 0.05 "
                                     "--seed 1 --out '" + (tmp / "pts.csv") + "' --labels '" +
                                     (tmp / "lab.csv") + "'");
  CHECK(gen.status == 0);
  const Matrix pts = kae::load_matrix(tmp / "pts.csv");
  CHECK(pts.rows() == 40);
  CHECK(pts.cols() == 2);
  const Matrix lab = kae::load_matrix(tmp / "lab.csv");
  CHECK(lab.rows() == 40);
  CHECK(lab.minCoeff() == 0.0);
  CHECK(lab.maxCoeff() == 1.0);

  const CmdResult bad = run_cli(tmp, "gen-data --kind hexagons --out '" + (tmp / "x.csv") + "'");
  CHECK(bad.status == 1);
  CHECK(single_error_line(bad.err));
}

TEST_CASE("finite fit, encode, reconstruct round trip") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind circles --n 15 --clusters 2 --noise 0.03 --seed 3 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);

  const CmdResult fit = run_cli(
      tmp, "fit --mode finite --data '" + (tmp / "pts.csv") +
               "' --layers 2,1,2 --kernel gaussian:median --lambda 0.0005 --epochs 15 "
               "--step 0.05 --seed 2 --out '" + (tmp / "model.json") + "'");
  CHECK(fit.status == 0);
  CHECK(fit.out.find("epoch") != std::string::npos);
  CHECK(fit.out.find("gaussian") != std::string::npos);  // resolved kernels are reported
  CHECK(std::filesystem::exists(tmp / "model.json"));
  CHECK(std::filesystem::exists(tmp / "model.trace.csv"));

  // The trace has one row per epoch plus the initial record, and the
  // objective column is finite and non-increasing overall.
  const Matrix trace = kae::load_matrix(tmp / "model.trace.csv");
  CHECK(trace.rows() == 16);
  CHECK(trace(trace.rows() - 1, 1) < trace(0, 1));

  const CmdResult enc = run_cli(tmp, "encode --model '" + (tmp / "model.json") + "' --data '" +
                                         (tmp / "pts.csv") + "' --out '" + (tmp / "codes.csv") +
                                         "'");
  CHECK(enc.status == 0);
  const Matrix codes = kae::load_matrix(tmp / "codes.csv");
  CHECK(codes.rows() == 30);
  CHECK(codes.cols() == 1);  // bottleneck layer

  const CmdResult rec = run_cli(tmp, "reconstruct --model '" + (tmp / "model.json") +
                                         "' --data '" + (tmp / "pts.csv") + "' --out '" +
                                         (tmp / "recon.csv") + "'");
  CHECK(rec.status == 0);
  const Matrix recon = kae::load_matrix(tmp / "recon.csv");
  CHECK(recon.rows() == 30);
  CHECK(recon.cols() == 2);

  // Explicit layer selection.
  const CmdResult enc1 = run_cli(tmp, "encode --model '" + (tmp / "model.json") + "' --data '" +
                                          (tmp / "pts.csv") + "' --layer 1 --out '" +
                                          (tmp / "codes1.csv") + "'");
  CHECK(enc1.status == 0);
  CHECK(kae::load_matrix(tmp / "codes1.csv").cols() == 2);
}

TEST_CASE("fits are deterministic byte for byte") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind gaussians --n 10 --clusters 2 --noise 0.1 --seed 5 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);
  const std::string common = "fit --mode finite --data '" + (tmp / "pts.csv") +
                             "' --layers 1,1 --kernel gaussian:0.8 --lambda 0.001 --epochs 8 "
                             "--step 0.05 --seed 9 --out '";
  REQUIRE(run_cli(tmp, common + (tmp / "a.json") + "'").status == 0);
  REQUIRE(run_cli(tmp, common + (tmp / "b.json") + "'").status == 0);
  CHECK(slurp(tmp / "a.json") == slurp(tmp / "b.json"));
  CHECK(slurp(tmp / "a.json").find("kae-model") != std::string::npos);
  CHECK(slurp(tmp / "a.trace.csv") == slurp(tmp / "b.trace.csv"));
}

TEST_CASE("kernelized fit, encode, and test-distortion") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind circles --n 12 --clusters 2 --noise 0.02 --seed 7 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);

  // Fitting from raw data builds the linear input Gram internally.
  const CmdResult fit = run_cli(
      tmp, "fit --mode k2ae --data '" + (tmp / "pts.csv") +
               "' --layers 2,1 --kernel gaussian:median --lambda 0.001 --epochs 10 "
               "--step 0.05 --seed 4 --out '" + (tmp / "k2.json") + "'");
  CHECK(fit.status == 0);
  CHECK(fit.out.find("Gram") != std::string::npos);

  // Prepare test-side Gram blocks for the training points themselves.
  const Matrix x = kae::load_matrix(tmp / "pts.csv");
  const Matrix k_in = x * x.transpose();
  kae::save_matrix(tmp / "gram_test.csv", k_in);
  kae::save_vector(tmp / "gram_diag.csv", k_in.diagonal());

  const CmdResult enc = run_cli(tmp, "encode --model '" + (tmp / "k2.json") + "' --gram-test '" +
                                         (tmp / "gram_test.csv") + "' --gram-test-diag '" +
                                         (tmp / "gram_diag.csv") + "' --out '" +
                                         (tmp / "codes.csv") + "'");
  CHECK(enc.status == 0);
  const Matrix codes = kae::load_matrix(tmp / "codes.csv");
  CHECK(codes.rows() == 24);
  CHECK(codes.cols() == 1);

  const CmdResult dist = run_cli(tmp, "test-distortion --model '" + (tmp / "k2.json") +
                                          "' --gram-test '" + (tmp / "gram_test.csv") +
                                          "' --gram-test-diag '" + (tmp / "gram_diag.csv") +
                                          "' --out '" + (tmp / "dist.csv") + "'");
  CHECK(dist.status == 0);
  CHECK(dist.out.find("mean") != std::string::npos);
  const Matrix d = kae::load_matrix(tmp / "dist.csv");
  CHECK(d.rows() == 24);
  CHECK(d.minCoeff() >= 0.0);

  // A kernelized model cannot produce raw-space reconstructions.
  const CmdResult rec = run_cli(tmp, "reconstruct --model '" + (tmp / "k2.json") + "' --data '" +
                                         (tmp / "pts.csv") + "' --out '" + (tmp / "r.csv") + "'");
  CHECK(rec.status == 1);
  CHECK(single_error_line(rec.err));

  // Fitting k2ae from an explicit Gram file matches fitting from the data.
  const CmdResult fit2 = run_cli(
      tmp, "fit --mode k2ae --gram '" + (tmp / "gram_test.csv") +
               "' --layers 2,1 --kernel gaussian:median --lambda 0.001 --epochs 10 "
               "--step 0.05 --seed 4 --out '" + (tmp / "k2b.json") + "'");
  CHECK(fit2.status == 0);
  CHECK(slurp(tmp / "k2.json") == slurp(tmp / "k2b.json"));
}

TEST_CASE("per-layer kernel lists and polynomial kernels") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind gaussians --n 8 --clusters 2 --noise 0.1 --seed 11 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);
  const CmdResult fit = run_cli(
      tmp, "fit --mode finite --data '" + (tmp / "pts.csv") +
               "' --layers 2,1 --kernel 'gaussian:0.5;poly:1,0.5,2' --lambda 0.001,0 "
               "--epochs 5 --step 0.02 --seed 1 --out '" + (tmp / "m.json") + "'");
  CHECK(fit.status == 0);
  CHECK(fit.out.find("poly") != std::string::npos);

  const CmdResult bad_kernel = run_cli(tmp, "fit --mode finite --data '" + (tmp / "pts.csv") +
                                                "' --layers 2,1 --kernel gaussian:nope --out '" +
                                                (tmp / "m2.json") + "'");
  CHECK(bad_kernel.status == 1);
  CHECK(single_error_line(bad_kernel.err));

  const CmdResult bad_counts = run_cli(tmp, "fit --mode finite --data '" + (tmp / "pts.csv") +
                                                "' --layers 2,1 --kernel 'linear;linear;linear' "
                                                "--out '" + (tmp / "m3.json") + "'");
  CHECK(bad_counts.status == 1);
  CHECK(single_error_line(bad_counts.err));
}

TEST_CASE("kpca embeds data and reports the spectrum") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind circles --n 10 --clusters 2 --noise 0.05 --seed 13 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);
  const CmdResult emb = run_cli(
      tmp, "kpca --data '" + (tmp / "pts.csv") +
               "' --kernel gaussian:median --components 2 --center --out '" + (tmp / "emb.csv") +
               "' --eigvals '" + (tmp / "ev.csv") + "'");
  CHECK(emb.status == 0);
  const Matrix e = kae::load_matrix(tmp / "emb.csv");
  CHECK(e.rows() == 20);
  CHECK(e.cols() == 2);
  const Matrix ev = kae::load_matrix(tmp / "ev.csv");
  CHECK(ev.rows() == 20);
  for (Index i = 0; i + 1 < ev.rows(); ++i) CHECK(ev(i, 0) >= ev(i + 1, 0));
  CHECK(ev.minCoeff() >= 0.0);

  const CmdResult too_many = run_cli(tmp, "kpca --data '" + (tmp / "pts.csv") +
                                              "' --components 100 --out '" + (tmp / "e.csv") +
                                              "'");
  CHECK(too_many.status == 1);
  CHECK(single_error_line(too_many.err));
}

TEST_CASE("gradcheck validates the analytic gradients end to end") {
  TempDir tmp;
  const CmdResult ok = run_cli(tmp, "gradcheck --n 5 --layers 2,1,2 --kernel gaussian:0.5 "
                                    "--lambda 0.1 --seed 3");
  CHECK(ok.status == 0);
  CHECK(ok.out.find("max relative error") != std::string::npos);

  // An absurdly tight tolerance fails loudly.
  const CmdResult tight = run_cli(tmp, "gradcheck --n 4 --layers 1,1 --kernel gaussian:0.5 "
                                       "--lambda 0.1 --seed 3 --tol 1e-16");
  CHECK(tight.status == 1);
  CHECK(single_error_line(tight.err));
}

TEST_CASE("toy surface grid") {
  TempDir tmp;
  const CmdResult toy = run_cli(tmp, "toy --lambda 0.1 --mu 0.1 --range 1 --steps 5 --out '" +
                                         (tmp / "grid.csv") + "'");
  CHECK(toy.status == 0);
  const Matrix grid = kae::load_matrix(tmp / "grid.csv");
  REQUIRE(grid.rows() == 5);
  REQUIRE(grid.cols() == 5);
  // Center of the grid is (phi, psi) = (0, 0) where the objective is 1.
  CHECK(grid(2, 2) == 1.0);
  // (phi, psi) = (1, 1) reconstructs perfectly: only the penalties remain.
  CHECK(grid(4, 4) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("the SIMD backend override is accepted") {
  TempDir tmp;
  REQUIRE(run_cli(tmp, "gen-data --kind gaussians --n 6 --clusters 2 --noise 0.1 --seed 15 "
                       "--out '" + (tmp / "pts.csv") + "'").status == 0);
  const CmdResult scalar = run_cli(tmp, "gradcheck --data '" + (tmp / "pts.csv") +
                                            "' --layers 1,1 --kernel gaussian:0.5 --lambda 0.05",
                                   "KAE_SIMD=scalar");
  CHECK(scalar.status == 0);

  // Unknown backend names fall back to the best supported implementation.
  const CmdResult bogus = run_cli(tmp, "gradcheck --n 4 --layers 1,1 --kernel gaussian:0.5",
                                  "KAE_SIMD=quantum");
  CHECK(bogus.status == 0);
}

TEST_CASE("missing files surface as single-line errors") {
  TempDir tmp;
  const CmdResult fit = run_cli(tmp, "fit --mode finite --data '" + (tmp / "nope.csv") +
                                         "' --layers 1,1 --out '" + (tmp / "m.json") + "'");
  CHECK(fit.status == 1);
  CHECK(single_error_line(fit.err));

  const CmdResult enc = run_cli(tmp, "encode --model '" + (tmp / "nope.json") + "' --data '" +
                                         (tmp / "nope.csv") + "' --out '" + (tmp / "c.csv") +
                                         "'");
  CHECK(enc.status == 1);
  CHECK(single_error_line(enc.err));
}

int run_all(int argc, char** argv) {
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_test <path-to-kae-binary> [doctest options]\n");
    return 64;
  }
  g_binary = argv[1];
  return run_all(argc - 1, argv + 1);
}
