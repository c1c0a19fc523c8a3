# RecNet Package
