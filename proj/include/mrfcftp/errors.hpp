// Copyright 2026 The mrfcftp Authors - All Rights Reserved.
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


#ifndef MRFCFTP_ERRORS_HPP
#define MRFCFTP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrfcftp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid model, schedule or geometry parameters.
struct ParameterError : Error {
  using Error::Error;
};

// A precondition of an operation does not hold.
struct ContractError : Error {
  using Error::Error;
};

// An exact computation would exceed its enumeration cap.
struct CapacityError : Error {
  using Error::Error;
};

// The boundary condition admits no feasible interior extension.
struct InfeasibleBoundary : Error {
  using Error::Error;
};

// A window does not contain the sites an operation needs.
struct WindowError : Error {
  using Error::Error;
};

}  // namespace mrfcftp

#endif  // MRFCFTP_ERRORS_HPP
