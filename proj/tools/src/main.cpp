// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <exception>
#include <iostream>

#include "common.hpp"
#include "dmrseg/error.hpp"

int main(int argc, char** argv) {
  using namespace dmrseg::tools;
  CLI::App app{"dmrseg: cardiac segmentation with distance map regularization"};
  app.require_subcommand(1);
  add_synth(app);
  add_train(app);
  add_eval(app);
  add_predict(app);
  add_distmap(app);
  add_diag(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help lands here with exit code 0.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitData;
  } catch (const dmrseg::NumericalError& e) {
    std::cerr << "dmrseg: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const dmrseg::Error& e) {
    std::cerr << "dmrseg: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    // Anything outside the library taxonomy (filesystem, bad_alloc) is still
    // a data or environment problem from the caller's side.
    std::cerr << "dmrseg: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
