#pragma once

#define PREFNP_VERSION "0.1.0"
