/* placeholder translation unit */
