/* Compiled as plain C to guarantee the public header stays C-compatible. */
#include <stdio.h>
#include <string.h>

#include "blursplat/blursplat.h"

int main(void) {
    if (strlen(bs_version()) == 0) {
        fprintf(stderr, "empty version string\n");
        return 1;
    }
    if (bs_cloud_load(NULL, NULL) != BS_ERROR_INVALID_ARGUMENT) {
        fprintf(stderr, "expected invalid-argument for NULL input\n");
        return 1;
    }
    if (bs_cloud_size(NULL) != 0) {
        fprintf(stderr, "NULL cloud should have size 0\n");
        return 1;
    }
    bs_cloud_free(NULL);
    printf("c header ok: %s\n", bs_version());
    return 0;
}
